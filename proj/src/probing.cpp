#include "debiaslab/probing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "debiaslab/ad/adamw.hpp"
#include "debiaslab/errors.hpp"

namespace debiaslab::probing {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_matrix(const ad::Tensor& t, std::span<const std::size_t> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.cols()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto r = t.row(rows[i]);
        for (std::size_t j = 0; j < r.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
    }
    return m;
}

/// Linear softmax classifier over standardized inputs.
class LinearProbe {
public:
    LinearProbe(const Matrix& x, std::span<const int> y, const ProbeConfig& cfg) {
        const auto n = x.rows();
        const auto d = x.cols();
        const auto k = static_cast<Eigen::Index>(cfg.label_classes);
        mean_ = x.colwise().mean();
        scale_ = ((x.rowwise() - mean_).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
        for (Eigen::Index j = 0; j < d; ++j) {
            if (!(scale_(j) > 1e-12)) scale_(j) = 1.0;
        }
        const Matrix z = standardize(x);
        Matrix onehot = Matrix::Zero(n, k);
        for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;

        weight_ = ad::Tensor({static_cast<std::size_t>(d), static_cast<std::size_t>(k)}, 0.0);
        bias_ = ad::Tensor({1, static_cast<std::size_t>(k)}, 0.0);
        ad::AdamWState state(ad::AdamWOptions{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
        std::vector<double> gw(weight_.numel()), gb(bias_.numel());
        std::array<ad::Tensor*, 2> params{&weight_, &bias_};
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            Matrix g = probabilities_std(z) - onehot;
            g /= static_cast<double>(n);
            Eigen::Map<Matrix>(gw.data(), d, k) = z.transpose() * g;
            Eigen::Map<Eigen::RowVectorXd>(gb.data(), k) = g.colwise().sum();
            std::array<std::span<const double>, 2> grads{gw, gb};
            ad::adamw_step(params, grads, state);
        }
    }

    Matrix log_probabilities(const Matrix& x) const {
        Matrix logits = logits_std(standardize(x));
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const double mx = logits.row(i).maxCoeff();
            const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
            logits.row(i).array() -= lse;
        }
        return logits;
    }

private:
    Matrix standardize(const Matrix& x) const {
        return (x.rowwise() - mean_).array().rowwise() / scale_.array();
    }

    Matrix logits_std(const Matrix& z) const {
        Eigen::Map<const Matrix> w(weight_.values().data(), static_cast<Eigen::Index>(weight_.rows()),
                                   static_cast<Eigen::Index>(weight_.cols()));
        Eigen::Map<const Eigen::RowVectorXd> b(bias_.values().data(), static_cast<Eigen::Index>(bias_.numel()));
        Matrix logits = z * w;
        logits.rowwise() += b;
        return logits;
    }

    Matrix probabilities_std(const Matrix& z) const {
        Matrix p = logits_std(z);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double mx = p.row(i).maxCoeff();
            p.row(i).array() = (p.row(i).array() - mx).exp();
            p.row(i) /= p.row(i).sum();
        }
        return p;
    }

    Eigen::RowVectorXd mean_;
    Eigen::RowVectorXd scale_;
    ad::Tensor weight_;
    ad::Tensor bias_;
};

std::vector<std::size_t> seeded_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

void check_inputs(const ad::Tensor& reps, std::span<const int> labels, std::size_t classes) {
    ad::require_matrix(reps, "probe");
    if (reps.rows() != labels.size()) throw DimensionError("probe: label count does not match representations");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw IndexError("probe label outside [0, K_b)");
    }
}

}  // namespace

std::vector<std::size_t> default_schedule(std::size_t n) {
    std::vector<std::size_t> out;
    std::size_t t = std::max<std::size_t>(32, n / 256);
    while (t < n) {
        out.push_back(t);
        t *= 2;
    }
    out.push_back(n);
    return out;
}

void validate_schedule(std::span<const std::size_t> schedule, std::size_t n, std::size_t label_classes) {
    if (schedule.empty()) throw ConfigError("probe schedule is empty");
    if (schedule.front() < 2 * label_classes) {
        throw ConfigError("first probe block must hold at least 2*K_b = " + std::to_string(2 * label_classes) +
                          " samples");
    }
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        if (schedule[i] <= schedule[i - 1]) throw ConfigError("probe schedule must be strictly increasing");
    }
    if (schedule.back() != n) {
        throw ConfigError("probe schedule ends at " + std::to_string(schedule.back()) + " but the probe set has " +
                          std::to_string(n) + " samples");
    }
}

nlohmann::json to_json(const ProbeReport& r, const ProbeConfig& c) {
    return {{"epoch", r.epoch},
            {"bias_label", r.bias_label},
            {"L_online", r.online_bits},
            {"L_unif", r.uniform_bits},
            {"compression", r.compression},
            {"probe_accuracy", r.probe_accuracy},
            {"samples", r.samples},
            {"probe",
             {{"kind", "linear-softmax"},
              {"schedule", r.schedule},
              {"steps", c.steps},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"accuracy_split", c.accuracy_split},
              {"seed", c.seed}}}};
}

ProbeReport online_codelength(const ad::Tensor& representations, std::span<const int> labels,
                              const ProbeConfig& config) {
    check_inputs(representations, labels, config.label_classes);
    const std::size_t n = labels.size();
    const std::vector<std::size_t> schedule = config.schedule.empty() ? default_schedule(n) : config.schedule;
    validate_schedule(schedule, n, config.label_classes);

    const auto order = seeded_order(n, config.seed);
    const Matrix x = to_matrix(representations, order);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[order[i]];

    const double log2k = std::log2(static_cast<double>(config.label_classes));
    double bits = static_cast<double>(schedule.front()) * log2k;
    for (std::size_t b = 0; b + 1 < schedule.size(); ++b) {
        const auto lo = static_cast<Eigen::Index>(schedule[b]);
        const auto hi = static_cast<Eigen::Index>(schedule[b + 1]);
        LinearProbe probe(x.topRows(lo), std::span<const int>(y).first(schedule[b]), config);
        const Matrix logp = probe.log_probabilities(x.middleRows(lo, hi - lo));
        for (Eigen::Index i = 0; i < hi - lo; ++i) {
            bits -= logp(i, y[static_cast<std::size_t>(lo + i)]) / std::log(2.0);
        }
    }

    ProbeReport report;
    report.samples = n;
    report.schedule = schedule;
    report.online_bits = bits;
    report.uniform_bits = static_cast<double>(n) * log2k;
    report.compression = report.uniform_bits / report.online_bits;
    return report;
}

double probe_accuracy(const ad::Tensor& representations, std::span<const int> labels, double split_fraction,
                      std::uint64_t seed, const ProbeConfig& config) {
    check_inputs(representations, labels, config.label_classes);
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("probe split fraction must lie in (0,1)");
    const std::size_t n = labels.size();
    const auto order = seeded_order(n, seed);
    const auto n_train = static_cast<std::size_t>(std::floor(split_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n) throw ContractError("probe split leaves an empty side");

    std::span<const std::size_t> train_rows(order.data(), n_train);
    std::span<const std::size_t> test_rows(order.data() + n_train, n - n_train);
    std::vector<int> y_train;
    for (std::size_t r : train_rows) y_train.push_back(labels[r]);
    if (std::all_of(y_train.begin(), y_train.end(), [&](int v) { return v == y_train.front(); })) {
        throw ContractError("probe training split holds a single class; resample with another seed");
    }
    LinearProbe probe(to_matrix(representations, train_rows), y_train, config);
    const Matrix logp = probe.log_probabilities(to_matrix(representations, test_rows));
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < logp.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logp.cols(); ++c) {
            if (logp(i, c) > logp(i, best)) best = c;
        }
        if (static_cast<int>(best) == labels[test_rows[static_cast<std::size_t>(i)]]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_rows.size());
}

std::vector<int> alignment_labels(const data::Dataset& dataset) {
    std::vector<int> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset.samples) out.push_back(s.bias_aligned ? 1 : 0);
    return out;
}

ProbeReport probe_model(const models::Model& model, const data::Dataset& probe_set, const ProbeConfig& config,
                        std::size_t epoch) {
    const ad::Tensor reps = models::encode_batched(model, probe_set.features());
    const auto labels = alignment_labels(probe_set);
    ProbeReport report = online_codelength(reps, labels, config);
    report.probe_accuracy = probe_accuracy(reps, labels, config.accuracy_split, config.seed, config);
    report.epoch = epoch;
    return report;
}

std::vector<ProbeReport> probe_checkpoints(const models::CheckpointStore& checkpoints, const data::Dataset& probe_set,
                                           const ProbeConfig& config) {
    if (checkpoints.empty()) throw LookupError("probe_checkpoints: no checkpoints stored");
    std::vector<ProbeReport> reports;
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        reports.push_back(probe_model(*checkpoints.load(k), probe_set, config, k));
    }
    return reports;
}

Projection pca_project(const ad::Tensor& representations, std::size_t dims) {
    ad::require_matrix(representations, "pca_project");
    const std::size_t n = representations.rows();
    const std::size_t d = representations.cols();
    if (n < dims) throw ContractError("pca_project: fewer rows than requested dimensions");
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    Matrix x = to_matrix(representations, all);
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(std::max<std::size_t>(n - 1, 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

    Projection out;
    out.coordinates = ad::Tensor({n, dims}, 0.0);
    const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    for (std::size_t c = 0; c < dims; ++c) {
        if (c >= d) {
            out.rank_deficient = true;
            out.explained_variance.push_back(0.0);
            continue;
        }
        const auto col = static_cast<Eigen::Index>(d - 1 - c);  // eigenvalues ascend
        const double var = eig.eigenvalues()(col);
        if (!(var > 1e-12 * std::max(top, 1e-300))) {
            out.rank_deficient = true;
            out.explained_variance.push_back(0.0);
            continue;
        }
        Eigen::VectorXd v = eig.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        const Eigen::VectorXd proj = x * v;
        for (std::size_t i = 0; i < n; ++i) out.coordinates(i, c) = proj(static_cast<Eigen::Index>(i));
        out.explained_variance.push_back(var);
    }
    return out;
}

void write_pca_csv(const std::filesystem::path& path, const data::Dataset& dataset, const Projection& projection) {
    if (projection.coordinates.rows() != dataset.size() || projection.coordinates.cols() < 2) {
        throw DimensionError("write_pca_csv: projection does not match dataset");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "id,x,y,label,bias_aligned\n" << std::setprecision(17);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset.samples[i];
        out << s.id << ',' << projection.coordinates(i, 0) << ',' << projection.coordinates(i, 1) << ',' << s.label
            << ',' << (s.bias_aligned ? 1 : 0) << '\n';
    }
}

}  // namespace debiaslab::probing
