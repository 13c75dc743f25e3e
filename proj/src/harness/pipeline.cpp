#include "debiaslab/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "debiaslab/ad/adamw.hpp"
#include "debiaslab/ad/ops.hpp"
#include "debiaslab/ad/tape.hpp"
#include "debiaslab/baselines.hpp"
#include "debiaslab/contrastive.hpp"
#include "debiaslab/errors.hpp"
#include "debiaslab/harness/report.hpp"

namespace debiaslab::harness {

namespace {

using data::SampleId;

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

void check_finite(double loss, const std::string& stage, std::size_t epoch, std::size_t batch) {
    if (!std::isfinite(loss)) {
        throw DivergenceError(stage + ": non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch));
    }
}

std::vector<int> labels_at(const data::Dataset& ds, std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(ds.samples[r].label);
    return out;
}

models::EncoderConfig debias_encoder_config(const ExperimentConfig& c, std::size_t input_dim) {
    models::EncoderConfig e;
    e.input_dim = input_dim;
    e.hidden_dims = c.debias_hidden;
    e.repr_dim = c.debias_repr;
    e.init_seed = derive_seed(c.seed, "debias_init");
    return e;
}

models::EncoderConfig bias_encoder_config(const ExperimentConfig& c, std::size_t input_dim) {
    models::EncoderConfig e;
    e.input_dim = input_dim;
    e.hidden_dims = c.bias_hidden;
    e.repr_dim = c.bias_repr;
    e.init_seed = derive_seed(c.seed, "bias_init");
    return e;
}

ad::AdamWOptions optimizer(double lr, double wd) {
    ad::AdamWOptions o;
    o.learning_rate = lr;
    o.weight_decay = wd;
    return o;
}

// Rows of `probs` for the given samples, looked up by origin id.
ad::Tensor bias_rows(const sampling::BiasProfile& profile, const data::Dataset& ds,
                     std::span<const std::size_t> rows) {
    ad::Tensor out({rows.size(), profile.num_classes});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto p = profile.probs(ds.samples[rows[i]].origin);
        std::copy(p.begin(), p.end(), out.row(i).begin());
    }
    return out;
}

ad::Tensor gather(const ad::Tensor& table, std::span<const std::size_t> rows) {
    ad::Tensor out({rows.size(), table.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = table.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

ad::Tensor predict_probs(const models::Model& model, const ad::Tensor& features) {
    return ad::softmax_rows(models::classify(model, models::encode_batched(model, features)));
}

// Per-anchor positive and dynamic-negative id lists for one epoch.
class ContrastiveSampler {
public:
    ContrastiveSampler(const ExperimentConfig& config, const data::Dataset& anchors, const data::Dataset& original,
                       const BiasArtifacts* bias, const sampling::DebiasSet* debias)
        : config_(config), anchors_(anchors), original_(original), bias_(bias), debias_(debias),
          positive_rng_(derive_seed(config.seed, "random_positives")),
          negative_rng_(derive_seed(config.seed, "random_negatives")) {
        for (std::size_t i = 0; i < original.size(); ++i) by_label_[original.samples[i].label].push_back(i);
    }

    void begin_epoch(std::size_t epoch, const models::Model& debias_model) {
        const std::size_t last = bias_ ? bias_->profile.epochs() - 1 : 0;
        const std::size_t k = std::min(epoch, last);
        if (!config_.disable_debias_positives) {
            const std::size_t kp = config_.positive_schedule == PositiveSchedule::static_final ? last : k;
            const bool per_epoch_space = config_.positive_space == PositiveSpace::debias_encoder;
            if (per_epoch_space || !positives_ready_ || kp != positive_epoch_) {
                sampling::PositiveOptions opts;
                opts.same_label = config_.positives_same_label;
                if (per_epoch_space) {
                    sampling::EmbeddingTable space(models::encode_batched(debias_model, original_.features()),
                                                   ids_of(original_));
                    positives_ = sampling::select_positives_all(anchors_, original_, *debias_, space,
                                                                config_.positives, opts);
                } else {
                    positives_ = sampling::select_positives_all(anchors_, original_, *debias_,
                                                                bias_->profile.embeddings[kp], config_.positives, opts);
                }
                positive_epoch_ = kp;
                positives_ready_ = true;
            }
        }
        if (!config_.disable_dynamic_negatives && config_.dynamic_negatives > 0 &&
            (!negatives_ready_ || k != negative_epoch_)) {
            negatives_ = sampling::select_dynamic_negatives_all(anchors_, original_, bias_->profile.embeddings[k],
                                                                config_.dynamic_negatives);
            negative_epoch_ = k;
            negatives_ready_ = true;
        }
    }

    // Positive ids for each anchor row of the batch; nullopt marks starvation.
    std::vector<std::optional<std::vector<SampleId>>> positives(std::span<const std::size_t> rows) {
        std::vector<std::optional<std::vector<SampleId>>> out;
        out.reserve(rows.size());
        if (!config_.disable_debias_positives) {
            for (std::size_t r : rows) out.push_back(positives_[r]);
            return out;
        }
        // One random same-class draw per class, shared by the batch's anchors of that class.
        std::unordered_map<int, std::vector<SampleId>> drawn;
        for (std::size_t r : rows) {
            const int y = anchors_.samples[r].label;
            auto it = drawn.find(y);
            if (it == drawn.end()) it = drawn.emplace(y, draw_same_class(y)).first;
            if (it->second.empty()) out.push_back(std::nullopt);
            else out.push_back(it->second);
        }
        return out;
    }

    std::vector<std::vector<SampleId>> dynamic_negatives(std::span<const std::size_t> rows) {
        std::vector<std::vector<SampleId>> out;
        out.reserve(rows.size());
        if (config_.dynamic_negatives == 0) {
            out.resize(rows.size());
            return out;
        }
        if (!config_.disable_dynamic_negatives) {
            for (std::size_t r : rows) out.push_back(negatives_[r]);
            return out;
        }
        for (std::size_t r : rows) out.push_back(draw_other_class(anchors_.samples[r].label));
        return out;
    }

private:
    static std::vector<SampleId> ids_of(const data::Dataset& ds) {
        std::vector<SampleId> ids;
        ids.reserve(ds.size());
        for (const auto& s : ds.samples) ids.push_back(s.id);
        return ids;
    }

    std::vector<SampleId> draw_same_class(int label) {
        std::vector<std::size_t> pool = by_label_[label];
        const std::size_t take = std::min(config_.positives, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(positive_rng_)]);
        }
        std::vector<SampleId> out;
        out.reserve(take);
        for (std::size_t i = 0; i < take; ++i) out.push_back(original_.samples[pool[i]].id);
        return out;
    }

    std::vector<SampleId> draw_other_class(int label) {
        std::size_t total = 0;
        for (const auto& [l, rows] : by_label_) {
            if (l != label) total += rows.size();
        }
        if (total == 0) throw ContractError("dynamic negatives: no sample with a different label");
        std::vector<SampleId> out;
        std::uniform_int_distribution<std::size_t> pick(0, total - 1);
        for (std::size_t n = 0; n < config_.dynamic_negatives; ++n) {
            std::size_t at = pick(negative_rng_);
            for (const auto& [l, rows] : by_label_) {
                if (l == label) continue;
                if (at < rows.size()) {
                    out.push_back(original_.samples[rows[at]].id);
                    break;
                }
                at -= rows.size();
            }
        }
        return out;
    }

    const ExperimentConfig& config_;
    const data::Dataset& anchors_;
    const data::Dataset& original_;
    const BiasArtifacts* bias_;
    const sampling::DebiasSet* debias_;
    std::map<int, std::vector<std::size_t>> by_label_;
    std::mt19937_64 positive_rng_;
    std::mt19937_64 negative_rng_;
    std::vector<std::optional<std::vector<SampleId>>> positives_;
    std::vector<std::vector<SampleId>> negatives_;
    std::size_t positive_epoch_ = 0;
    std::size_t negative_epoch_ = 0;
    bool positives_ready_ = false;
    bool negatives_ready_ = false;
};

struct DctStep {
    std::optional<ad::Var> loss;
    std::size_t anchors = 0;
    std::size_t starved_positive = 0;
    std::size_t starved_negative = 0;
};

DctStep contrastive_term(ad::Var reps, std::span<const std::size_t> rows, const data::Dataset& anchors,
                         const data::Dataset& original, const std::unordered_map<SampleId, std::size_t>& original_row,
                         const models::Model& momentum, const contrastive::MomentumQueue& queue,
                         ContrastiveSampler& sampler, const ExperimentConfig& config) {
    DctStep step;
    const auto positives = sampler.positives(rows);
    const auto dynamic = sampler.dynamic_negatives(rows);

    std::vector<SampleId> members;
    std::unordered_map<SampleId, std::uint32_t> member_row;
    auto add = [&](SampleId id) {
        auto [it, inserted] = member_row.try_emplace(id, static_cast<std::uint32_t>(members.size()));
        if (inserted) members.push_back(id);
        return it->second;
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (positives[i]) {
            for (SampleId id : *positives[i]) add(id);
        }
        for (SampleId id : dynamic[i]) add(id);
    }

    const std::size_t q = queue.size();
    const std::size_t dim = queue.repr_dim();
    contrastive::ContrastiveBatch batch;
    batch.bank = ad::Tensor({q + members.size(), dim});
    {
        const ad::Tensor snap = queue.snapshot();
        std::copy(snap.values().begin(), snap.values().end(), batch.bank.values().begin());
    }
    if (!members.empty()) {
        std::vector<std::size_t> member_rows;
        member_rows.reserve(members.size());
        for (SampleId id : members) member_rows.push_back(original_row.at(id));
        const ad::Tensor encoded = models::encode(momentum, original.features(member_rows));
        std::copy(encoded.values().begin(), encoded.values().end(), batch.bank.values().begin() + static_cast<std::ptrdiff_t>(q * dim));
    }

    std::vector<std::size_t> included;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!positives[i] || positives[i]->empty()) {
            ++step.starved_positive;
            continue;
        }
        const int y = anchors.samples[rows[i]].label;
        auto sel = contrastive::select_negatives(queue, y, dynamic[i]);
        if (!sel) {
            ++step.starved_negative;
            continue;
        }
        std::vector<std::uint32_t> pos;
        pos.reserve(positives[i]->size());
        for (SampleId id : *positives[i]) pos.push_back(static_cast<std::uint32_t>(q + member_row.at(id)));
        std::vector<std::uint32_t> neg;
        neg.reserve(sel->size());
        for (std::size_t e : sel->queue_entries) neg.push_back(static_cast<std::uint32_t>(e));
        for (std::size_t j : sel->dynamic_entries) {
            neg.push_back(static_cast<std::uint32_t>(q + member_row.at(dynamic[i][j])));
        }
        batch.positives.push_back(std::move(pos));
        batch.negatives.push_back(std::move(neg));
        included.push_back(i);
    }
    step.anchors = included.size();
    if (included.empty()) return step;
    ad::Var anchor_reps = included.size() == rows.size() ? reps : ad::gather_rows(reps, included);
    step.loss = contrastive::dct_loss(anchor_reps, batch, config.tau, config.denominator);
    return step;
}

}  // namespace

data::GeneratedData generate_data(const ExperimentConfig& config) {
    data::GeneratorConfig g = config.generator;
    g.seed = derive_seed(config.seed, "data");
    return data::generate(g);
}

BiasArtifacts train_bias_only(const ExperimentConfig& config, const data::Dataset& train) {
    if (train.empty()) throw ContractError("train_bias_only: empty training set");
    models::Model model(bias_encoder_config(config, train.feature_dim()), config.generator.num_classes,
                        models::Role::bias_only);
    ad::AdamWState opt(optimizer(config.bias_learning_rate, config.weight_decay));
    std::mt19937_64 rng(derive_seed(config.seed, "bias_shuffle"));
    const ad::Tensor features = train.features();
    BiasArtifacts out{model, {}, {}, {}, 0.0};
    const std::size_t batches = std::max<std::size_t>(1, train.size() / config.batch_size);
    const std::size_t bs = std::min(config.batch_size, train.size());
    for (std::size_t epoch = 0; epoch < config.bias_epochs; ++epoch) {
        const auto order = shuffled(train.size(), rng);
        double total = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::span<const std::size_t> rows(order.data() + b * bs, bs);
            const auto labels = labels_at(train, rows);
            model.zero_grad();
            ad::Tape tape;
            auto bound = models::bind(tape, model);
            auto x = tape.constant(gather(features, rows));
            auto loss = ad::log_softmax_ce(models::classify(bound, models::encode(bound, x)), labels);
            check_finite(loss.item(), "bias-only training", epoch, b);
            tape.backward(loss);
            auto params = model.trainable_parameters();
            ad::adamw_step(params, opt);
            total += loss.item();
        }
        out.epoch_loss.push_back(total / static_cast<double>(batches));
        out.checkpoints.save(epoch, model);
    }
    out.model = model;
    out.profile = sampling::compute_bias_profile(out.checkpoints, train);
    out.train_accuracy = evaluate(model, train);
    return out;
}

double evaluate(const models::Model& model, const data::Dataset& dataset) {
    if (dataset.empty()) throw ContractError("evaluate: empty dataset");
    const ad::Tensor logits = models::classify(model, models::encode_batched(model, dataset.features()));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (static_cast<int>(sampling::argmax(logits.row(i))) == dataset.samples[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

data::Dataset build_probe_set(const data::GeneratedData& data, std::size_t size) {
    data::Dataset out;
    out.split = data::Split::id_dev;
    out.provenance = "probe:id_dev+ood";
    const std::size_t half = size / 2;
    for (const auto* part : {&data.id_dev, &data.ood}) {
        const std::size_t take = std::min(half, part->size());
        out.samples.insert(out.samples.end(), part->samples.begin(),
                           part->samples.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return out;
}

probing::ProbeConfig probe_config(const ExperimentConfig& config) {
    probing::ProbeConfig p;
    p.steps = config.probe_steps;
    p.learning_rate = config.probe_learning_rate;
    p.weight_decay = config.probe_weight_decay;
    p.accuracy_split = config.probe_split;
    p.seed = derive_seed(config.seed, "probe");
    return p;
}

TrainResult train_main(const ExperimentConfig& config, const data::GeneratedData& data, const BiasArtifacts* bias) {
    config.validate();
    if (config.needs_bias_model() && bias == nullptr) {
        throw ContractError(std::string("train_main: method ") + method_name(config.method) +
                            " needs bias-only artifacts");
    }
    const data::Dataset& original = data.train;
    const std::size_t input_dim = original.feature_dim();
    const std::size_t num_classes = config.generator.num_classes;

    TrainResult result{models::Model(debias_encoder_config(config, input_dim), num_classes, models::Role::debias),
                       {},
                       {},
                       std::nullopt};
    RunReport& report = result.report;
    report.config_hash = config.hash();
    report.method = config.method;
    report.seed = config.seed;
    if (bias) report.bias_train_accuracy = bias->train_accuracy;

    const bool dct = config.method == Method::dct;
    const bool needs_debias_set =
        (dct && !config.disable_debias_positives) || (config.method == Method::ce && config.ce_on_augmented);
    if (needs_debias_set) {
        result.debias_set = sampling::filter_debias(original, bias->profile, config.lambda, config.filter_source);
        if (dct) report.debias_set_size = result.debias_set->size();
    }
    const data::Dataset train =
        config.uses_augmented_train() ? sampling::augment_train(original, *result.debias_set) : original;
    report.train_size = train.size();

    // Teacher for confidence regularization: a plain-CE model trained with the same settings.
    ad::Tensor teacher_probs;
    if (config.method == Method::conf_reg) {
        ExperimentConfig teacher_cfg = config;
        teacher_cfg.method = Method::ce;
        teacher_cfg.ce_on_augmented = false;
        teacher_cfg.probe = false;
        auto teacher = train_main(teacher_cfg, data, nullptr);
        teacher_probs = predict_probs(teacher.model, original.features());
    }

    models::Model& model = result.model;
    models::Model momentum = model;
    momentum.set_role(models::Role::momentum);
    contrastive::MomentumQueue queue(config.queue_capacity, config.debias_repr);
    const auto warmup_fill = static_cast<std::size_t>(
        std::ceil(config.warmup_fraction * static_cast<double>(config.queue_capacity)));
    std::optional<ContrastiveSampler> sampler;
    if (dct) sampler.emplace(config, train, original, bias, result.debias_set ? &*result.debias_set : nullptr);
    const auto original_row = original.index_by_id();

    ad::AdamWState opt(optimizer(config.learning_rate, config.weight_decay));
    std::mt19937_64 rng(derive_seed(config.seed, "shuffle"));
    const ad::Tensor features = train.features();
    const std::size_t bs = std::min(config.batch_size, train.size());
    const std::size_t batches = train.size() / bs;
    QueueStats qstats;
    baselines::PoeDiagnostics poe;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (sampler) sampler->begin_epoch(epoch, model);
        const auto order = shuffled(train.size(), rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.batches = batches;
        double total = 0.0, ce_total = 0.0, dct_total = 0.0;
        std::size_t dct_batches = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::span<const std::size_t> rows(order.data() + b * bs, bs);
            const auto labels = labels_at(train, rows);
            const ad::Tensor x_batch = gather(features, rows);
            model.zero_grad();
            ad::Tape tape;
            auto bound = models::bind(tape, model);
            auto reps = models::encode(bound, tape.constant(x_batch));
            auto logits = models::classify(bound, reps);
            auto ce = ad::log_softmax_ce(logits, labels);
            ad::Var loss = ce;
            switch (config.method) {
                case Method::ce: break;
                case Method::reweight: {
                    const ad::Tensor bp = bias_rows(bias->profile, train, rows);
                    loss = baselines::reweight_loss({logits, bp, labels});
                    break;
                }
                case Method::poe: {
                    const ad::Tensor bp = bias_rows(bias->profile, train, rows);
                    loss = baselines::poe_loss({logits, bp, labels}, &poe);
                    break;
                }
                case Method::conf_reg: {
                    const ad::Tensor bp = bias_rows(bias->profile, train, rows);
                    loss = baselines::conf_reg_loss({logits, bp, labels}, gather(teacher_probs, rows));
                    break;
                }
                case Method::dct: {
                    if (queue.size() < warmup_fill) {
                        ++rec.warmup_batches;
                        break;
                    }
                    auto step = contrastive_term(reps, rows, train, original, original_row, momentum, queue,
                                                 *sampler, config);
                    rec.dct_anchors += step.anchors;
                    rec.starved_positive += step.starved_positive;
                    rec.starved_negative += step.starved_negative;
                    if (step.loss) {
                        loss = contrastive::combined_loss(ce, *step.loss, config.alpha);
                        dct_total += step.loss->item();
                        ++dct_batches;
                    }
                    break;
                }
            }
            check_finite(loss.item(), "main training", epoch, b);
            tape.backward(loss);
            auto params = model.trainable_parameters();
            ad::adamw_step(params, opt);
            total += loss.item();
            ce_total += ce.item();

            if (dct) {
                models::momentum_update(momentum, model, config.momentum, config.momentum_convention);
                std::vector<SampleId> ids;
                ids.reserve(rows.size());
                for (std::size_t r : rows) ids.push_back(train.samples[r].origin);
                queue.push(models::encode(momentum, x_batch), labels, ids);
                ++qstats.batches;
            }
        }
        rec.train_loss = total / static_cast<double>(batches);
        rec.ce_loss = ce_total / static_cast<double>(batches);
        if (dct_batches > 0) rec.dct_loss = dct_total / static_cast<double>(dct_batches);
        rec.id_accuracy = evaluate(model, data.id_dev);
        rec.ood_accuracy = evaluate(model, data.ood);
        result.checkpoints.save(epoch, model);
        report.epochs.push_back(rec);
    }
    if (dct) {
        qstats.pushes = queue.total_pushed();
        qstats.evictions = queue.evictions();
        qstats.final_size = queue.size();
        report.queue = qstats;
    }
    if (config.method == Method::poe) report.poe_clamped = poe.clamped;
    report.id_accuracy = report.epochs.back().id_accuracy;
    report.ood_accuracy = report.epochs.back().ood_accuracy;

    if (config.probe) {
        const data::Dataset probe_set = build_probe_set(data, config.probe_size);
        const auto probes = probing::probe_checkpoints(result.checkpoints, probe_set, probe_config(config));
        for (std::size_t e = 0; e < probes.size() && e < report.epochs.size(); ++e) report.epochs[e].probe = probes[e];
    }
    return result;
}

std::filesystem::path run_directory(const ExperimentConfig& config) { return config.output_root / config.hash(); }

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_status(const std::filesystem::path& dir, const std::string& status, const std::string& stage,
                  const std::string& error) {
    nlohmann::json j{{"status", status}, {"stage", stage}};
    if (!error.empty()) j["error"] = error;
    write_text(dir / "status.json", j.dump(2) + "\n");
}

}  // namespace

std::filesystem::path run_experiment(const ExperimentConfig& config, RunReport* report_out) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto dir = run_directory(config);
    std::filesystem::create_directories(dir);
    write_text(dir / "config.ini", config.to_ini());
    std::string stage = "generate";
    try {
        const auto data = generate_data(config);
        std::optional<BiasArtifacts> bias;
        if (config.needs_bias_model()) {
            stage = "train_bias_only";
            bias = train_bias_only(config, data.train);
            std::filesystem::create_directories(dir / "bias_checkpoints");
            for (std::size_t e = 0; e < bias->checkpoints.size(); ++e) {
                models::write_checkpoint(dir / "bias_checkpoints" / ("epoch_" + std::to_string(e) + ".json"),
                                         *bias->checkpoints.load(e));
            }
        }
        stage = "train_main";
        auto result = train_main(config, data, bias ? &*bias : nullptr);
        stage = "write_reports";
        result.report.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::filesystem::create_directories(dir / "checkpoints");
        for (std::size_t e = 0; e < result.checkpoints.size(); ++e) {
            models::write_checkpoint(dir / "checkpoints" / ("epoch_" + std::to_string(e) + ".json"),
                                     *result.checkpoints.load(e));
        }
        if (result.debias_set) sampling::write_debias_ids(dir / "debias_ids.txt", *result.debias_set);
        if (config.probe) {
            const auto probe_set = build_probe_set(data, config.probe_size);
            const auto projection = probing::pca_project(models::encode_batched(result.model, probe_set.features()));
            probing::write_pca_csv(dir / "pca.csv", probe_set, projection);
        }
        write_text(dir / "metrics.jsonl", metrics_jsonl(result.report, config));
        write_text(dir / "summary.csv", summary_header() + summary_row(result.report, config));
        write_text(dir / "timing.json",
                   nlohmann::json{{"wall_clock_seconds", result.report.wall_clock_seconds}}.dump() + "\n");
        write_status(dir, "ok", "done", "");
        if (report_out) *report_out = std::move(result.report);
    } catch (const std::exception& e) {
        write_status(dir, "failed", stage, e.what());
        throw;
    }
    return dir;
}

}  // namespace debiaslab::harness
