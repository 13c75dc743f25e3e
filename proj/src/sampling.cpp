#include "debiaslab/sampling.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <string>

#include "debiaslab/ad/ops.hpp"
#include "debiaslab/errors.hpp"

namespace debiaslab::sampling {

EmbeddingTable::EmbeddingTable(ad::Tensor r, std::vector<SampleId> i) : rows(std::move(r)), ids(std::move(i)) {
    if (rows.rows() != ids.size()) throw DimensionError("embedding table: row count differs from id count");
    row_of.reserve(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) row_of.emplace(ids[k], k);
}

std::span<const double> EmbeddingTable::of(SampleId id) const {
    auto it = row_of.find(id);
    if (it == row_of.end()) throw LookupError("no embedding for sample " + std::to_string(id));
    return rows.row(it->second);
}

std::span<const double> BiasProfile::probs(SampleId id) const {
    auto it = row_of.find(id);
    if (it == row_of.end()) throw LookupError("no bias probabilities for sample " + std::to_string(id));
    return probabilities.row(it->second);
}

std::span<const double> BiasProfile::probs(SampleId id, std::size_t epoch) const {
    if (epoch >= epoch_probabilities.size()) throw LookupError("no bias probabilities for epoch " + std::to_string(epoch));
    auto it = row_of.find(id);
    if (it == row_of.end()) throw LookupError("no bias probabilities for sample " + std::to_string(id));
    return epoch_probabilities[epoch].row(it->second);
}

BiasProfile compute_bias_profile(const models::CheckpointStore& checkpoints, const data::Dataset& train,
                                 std::size_t epochs) {
    if (epochs == 0) throw LookupError("bias profile needs at least one checkpoint");
    BiasProfile profile;
    profile.ids.reserve(train.size());
    for (const auto& s : train.samples) profile.ids.push_back(s.id);
    profile.row_of = train.index_by_id();
    const ad::Tensor x = train.features();
    for (std::size_t k = 0; k < epochs; ++k) {
        auto model = checkpoints.load(k);
        profile.num_classes = model->num_classes();
        ad::Tensor emb = models::encode_batched(*model, x);
        profile.epoch_probabilities.push_back(ad::softmax_rows(models::classify(*model, emb)));
        profile.embeddings.emplace_back(std::move(emb), profile.ids);
    }
    profile.probabilities = profile.epoch_probabilities.back();
    return profile;
}

BiasProfile compute_bias_profile(const models::CheckpointStore& checkpoints, const data::Dataset& train) {
    return compute_bias_profile(checkpoints, train, checkpoints.size());
}

std::size_t argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = c;
    }
    return best;
}

bool debias_predicate(std::span<const double> probs, int label, double lambda) {
    const std::size_t c = argmax(probs);
    return probs[c] >= lambda && static_cast<int>(c) != label;
}

bool DebiasSet::contains(SampleId id) const { return std::binary_search(ids.begin(), ids.end(), id); }

DebiasSet filter_debias(const data::Dataset& train, const BiasProfile& profile, double lambda,
                        FilterSource source) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("filter_debias: lambda must lie in [0,1]");
    DebiasSet set;
    set.lambda = lambda;
    for (const auto& s : train.samples) {
        bool keep = false;
        if (source == FilterSource::final_epoch) {
            keep = debias_predicate(profile.probs(s.origin), s.label, lambda);
        } else {
            for (std::size_t k = 0; k < profile.epoch_probabilities.size() && !keep; ++k) {
                keep = debias_predicate(profile.probs(s.origin, k), s.label, lambda);
            }
        }
        if (keep) set.ids.push_back(s.id);
    }
    std::sort(set.ids.begin(), set.ids.end());
    return set;
}

void write_debias_ids(const std::filesystem::path& path, const DebiasSet& set) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (SampleId id : set.ids) out << id << '\n';
}

DebiasSet read_debias_ids(const std::filesystem::path& path, double lambda) {
    std::ifstream in(path);
    if (!in) throw LookupError("debias id file not found: " + path.string());
    DebiasSet set;
    set.lambda = lambda;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            std::size_t used = 0;
            set.ids.push_back(std::stoll(line, &used));
            if (used != line.size()) throw std::invalid_argument(line);
        } catch (const std::exception&) {
            throw ParseError(lineno, "expected an integer id, got '" + line + "'");
        }
    }
    std::sort(set.ids.begin(), set.ids.end());
    return set;
}

namespace {

/// Candidate embeddings stored column-wise so that one query scans a
/// contiguous array per dimension.
struct CandidateBlock {
    std::vector<SampleId> ids;
    std::vector<std::vector<double>> columns;

    void add(SampleId id, std::span<const double> embedding) {
        if (columns.empty()) columns.resize(embedding.size());
        ids.push_back(id);
        for (std::size_t d = 0; d < embedding.size(); ++d) columns[d].push_back(embedding[d]);
    }

    // Squared L2 distance to every candidate, summed in dimension order.
    void distances(std::span<const double> query, std::vector<double>& out) const {
        const std::size_t m = ids.size();
        out.assign(m, 0.0);
        double* dst = out.data();
        for (std::size_t d = 0; d < columns.size(); ++d) {
            const double* col = columns[d].data();
            const double q = query[d];
            for (std::size_t j = 0; j < m; ++j) {
                const double diff = col[j] - q;
                dst[j] += diff * diff;
            }
        }
    }
};

struct Scored {
    double dist;
    SampleId id;
};

std::span<const double> embedding_of(const data::Sample& s, const EmbeddingTable& space) {
    return space.of(s.origin);
}

const data::Sample& find_sample(const data::Dataset& ds, SampleId id) {
    for (const auto& s : ds.samples) {
        if (s.id == id) return s;
    }
    throw LookupError("sample " + std::to_string(id) + " not found");
}

std::map<int, CandidateBlock> group_by_label(const data::Dataset& ds, std::span<const SampleId> ids,
                                             const EmbeddingTable& space) {
    const auto index = ds.index_by_id();
    std::map<int, CandidateBlock> groups;
    for (SampleId id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw LookupError("sample " + std::to_string(id) + " not in dataset");
        const auto& s = ds.samples[it->second];
        groups[s.label].add(s.id, embedding_of(s, space));
    }
    return groups;
}

std::vector<SampleId> farthest(const data::Sample& anchor, std::span<const double> query,
                               const std::vector<const CandidateBlock*>& pools, std::size_t count,
                               std::vector<double>& scratch) {
    std::vector<Scored> scored;
    for (const CandidateBlock* pool : pools) {
        pool->distances(query, scratch);
        for (std::size_t j = 0; j < pool->ids.size(); ++j) {
            if (pool->ids[j] == anchor.id) continue;
            scored.push_back({scratch[j], pool->ids[j]});
        }
    }
    auto order = [](const Scored& a, const Scored& b) { return a.dist > b.dist || (a.dist == b.dist && a.id < b.id); };
    const std::size_t take = std::min(count, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), order);
    std::vector<SampleId> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].id);
    return out;
}

std::vector<SampleId> nearest(std::span<const double> query, const std::vector<const CandidateBlock*>& pools,
                              std::size_t count, std::vector<double>& scratch) {
    if (count == 1) {
        double best = std::numeric_limits<double>::infinity();
        SampleId best_id = std::numeric_limits<SampleId>::max();
        bool found = false;
        for (const CandidateBlock* pool : pools) {
            pool->distances(query, scratch);
            for (std::size_t j = 0; j < pool->ids.size(); ++j) {
                const double d = scratch[j];
                if (!found || d < best || (d == best && pool->ids[j] < best_id)) {
                    best = d;
                    best_id = pool->ids[j];
                    found = true;
                }
            }
        }
        return found ? std::vector<SampleId>{best_id} : std::vector<SampleId>{};
    }
    std::vector<Scored> scored;
    for (const CandidateBlock* pool : pools) {
        pool->distances(query, scratch);
        for (std::size_t j = 0; j < pool->ids.size(); ++j) scored.push_back({scratch[j], pool->ids[j]});
    }
    auto order = [](const Scored& a, const Scored& b) { return a.dist < b.dist || (a.dist == b.dist && a.id < b.id); };
    const std::size_t take = std::min(count, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), order);
    std::vector<SampleId> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].id);
    return out;
}

std::vector<const CandidateBlock*> positive_pools(const std::map<int, CandidateBlock>& groups, int label,
                                                  const PositiveOptions& options) {
    std::vector<const CandidateBlock*> pools;
    for (const auto& [l, block] : groups) {
        if (!options.same_label || l == label) pools.push_back(&block);
    }
    return pools;
}

std::vector<const CandidateBlock*> other_label_pools(const std::map<int, CandidateBlock>& groups, int label) {
    std::vector<const CandidateBlock*> pools;
    for (const auto& [l, block] : groups) {
        if (l != label) pools.push_back(&block);
    }
    return pools;
}

std::optional<std::vector<SampleId>> positives_for(const data::Sample& anchor, const EmbeddingTable& space,
                                                   const std::map<int, CandidateBlock>& groups, std::size_t count,
                                                   const PositiveOptions& options, std::vector<double>& scratch) {
    auto picked = farthest(anchor, embedding_of(anchor, space), positive_pools(groups, anchor.label, options), count,
                           scratch);
    if (picked.empty()) return std::nullopt;
    return picked;
}

std::map<int, CandidateBlock> group_all(const data::Dataset& candidates, const EmbeddingTable& space) {
    std::map<int, CandidateBlock> groups;
    for (const auto& s : candidates.samples) groups[s.label].add(s.id, embedding_of(s, space));
    return groups;
}

}  // namespace

std::optional<std::vector<SampleId>> select_positives(SampleId anchor_id, const data::Dataset& train,
                                                      const DebiasSet& debias_set, const EmbeddingTable& space,
                                                      std::size_t count, PositiveOptions options) {
    const auto& anchor = find_sample(train, anchor_id);
    const auto groups = group_by_label(train, debias_set.ids, space);
    std::vector<double> scratch;
    return positives_for(anchor, space, groups, count, options, scratch);
}

std::optional<std::vector<SampleId>> select_positives(SampleId anchor_id, const data::Dataset& train,
                                                      const DebiasSet& debias_set, const BiasProfile& profile,
                                                      std::size_t epoch, std::size_t count, PositiveOptions options) {
    if (epoch >= profile.epochs()) throw LookupError("no bias embeddings for epoch " + std::to_string(epoch));
    return select_positives(anchor_id, train, debias_set, profile.embeddings[epoch], count, options);
}

std::vector<SampleId> select_dynamic_negatives(SampleId anchor_id, const data::Dataset& anchors,
                                               const data::Dataset& candidates, const EmbeddingTable& space,
                                               std::size_t count) {
    const auto& anchor = find_sample(anchors, anchor_id);
    const auto groups = group_all(candidates, space);
    const auto pools = other_label_pools(groups, anchor.label);
    if (pools.empty()) throw ContractError("select_dynamic_negatives: no sample with a different label");
    std::vector<double> scratch;
    return nearest(embedding_of(anchor, space), pools, count, scratch);
}

std::vector<SampleId> select_dynamic_negatives(SampleId anchor_id, const data::Dataset& train,
                                               const BiasProfile& profile, std::size_t epoch, std::size_t count) {
    if (epoch >= profile.epochs()) throw LookupError("no bias embeddings for epoch " + std::to_string(epoch));
    return select_dynamic_negatives(anchor_id, train, train, profile.embeddings[epoch], count);
}

std::vector<std::optional<std::vector<SampleId>>> select_positives_all(const data::Dataset& anchors,
                                                                       const data::Dataset& train,
                                                                       const DebiasSet& debias_set,
                                                                       const EmbeddingTable& space,
                                                                       std::size_t count, PositiveOptions options) {
    const auto groups = group_by_label(train, debias_set.ids, space);
    std::vector<std::optional<std::vector<SampleId>>> out;
    out.reserve(anchors.size());
    std::vector<double> scratch;
    for (const auto& a : anchors.samples) out.push_back(positives_for(a, space, groups, count, options, scratch));
    return out;
}

std::vector<std::vector<SampleId>> select_dynamic_negatives_all(const data::Dataset& anchors,
                                                                const data::Dataset& candidates,
                                                                const EmbeddingTable& space, std::size_t count) {
    const auto groups = group_all(candidates, space);
    std::vector<std::vector<SampleId>> out;
    out.reserve(anchors.size());
    std::vector<double> scratch;
    for (const auto& a : anchors.samples) {
        const auto pools = other_label_pools(groups, a.label);
        if (pools.empty()) throw ContractError("select_dynamic_negatives: no sample with a different label");
        out.push_back(nearest(embedding_of(a, space), pools, count, scratch));
    }
    return out;
}

data::Dataset augment_train(const data::Dataset& train, const DebiasSet& debias_set) {
    data::Dataset out = train;
    out.provenance = train.provenance + "+debias_duplicates";
    if (debias_set.empty()) return out;
    const auto index = train.index_by_id();
    SampleId next = std::numeric_limits<SampleId>::min();
    for (const auto& s : train.samples) next = std::max(next, s.id);
    ++next;
    out.samples.reserve(train.size() + debias_set.size());
    for (SampleId id : debias_set.ids) {
        auto it = index.find(id);
        if (it == index.end()) throw LookupError("debias id " + std::to_string(id) + " not in training set");
        data::Sample copy = train.samples[it->second];
        copy.id = next++;
        out.samples.push_back(std::move(copy));
    }
    return out;
}

}  // namespace debiaslab::sampling
