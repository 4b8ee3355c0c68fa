#include "adpsgd/objectives.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "adpsgd/errors.hpp"

namespace adpsgd::objectives {

namespace {

Vec gaussian_vector(int n, Rng& rng) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.next_gaussian();
    return v;
}

int split_train_count(int total, double heldout_fraction) {
    int heldout = static_cast<int>(std::lround(total * heldout_fraction));
    if (heldout < 1) heldout = 1;
    if (heldout >= total) heldout = total - 1;
    return total - heldout;
}

class QuadraticObjective : public Objective {
  public:
    QuadraticObjective(Eigen::MatrixXd a, Vec w_star, std::shared_ptr<const Dataset> ds,
                       double mu, double sigma)
        : a_(std::move(a)), w_star_(std::move(w_star)), ds_(std::move(ds)) {
        dimension_ = static_cast<int>(w_star_.size());
        optimum_ = w_star_;
        mu_ = mu;
        sigma_ = sigma;
    }

    double loss(const Vec& w, const SampleBatch& batch) const override {
        const Vec d = w - w_star_;
        double value = 0.5 * d.dot(a_ * d);
        if (batch.size() > 0) {
            Vec noise = Vec::Zero(dimension_);
            for (int i : batch.indices) noise += ds_->samples[i].x;
            noise /= batch.size();
            value += noise.dot(w);
        }
        return value;
    }

    Vec gradient(const Vec& w, const SampleBatch& batch) const override {
        Vec g = a_ * (w - w_star_);
        if (batch.size() > 0) {
            Vec noise = Vec::Zero(dimension_);
            for (int i : batch.indices) noise += ds_->samples[i].x;
            g += noise / batch.size();
        }
        return g;
    }

    double heldout_loss(const Vec& w) const override {
        const Vec d = w - w_star_;
        return 0.5 * d.dot(a_ * d);
    }

  private:
    Eigen::MatrixXd a_;
    Vec w_star_;
    std::shared_ptr<const Dataset> ds_;
};

class LogisticObjective : public Objective {
  public:
    static constexpr double kRegularization = 1e-4;

    LogisticObjective(std::shared_ptr<const Dataset> ds, int dimension)
        : ds_(std::move(ds)) {
        dimension_ = dimension;
        estimate_constants();
    }

    double loss(const Vec& w, const SampleBatch& batch) const override {
        double total = 0.0;
        for (int i : batch.indices) {
            const Sample& s = ds_->samples[i];
            total += log1p_exp(-s.y * w.dot(s.x));
        }
        return total / batch.size() + 0.5 * kRegularization * w.squaredNorm();
    }

    Vec gradient(const Vec& w, const SampleBatch& batch) const override {
        Vec g = Vec::Zero(dimension_);
        for (int i : batch.indices) {
            const Sample& s = ds_->samples[i];
            const double margin = s.y * w.dot(s.x);
            g -= s.y * sigmoid(-margin) * s.x;
        }
        return g / batch.size() + kRegularization * w;
    }

    double heldout_loss(const Vec& w) const override {
        double total = 0.0;
        for (int i = ds_->train_count; i < static_cast<int>(ds_->samples.size()); ++i) {
            const Sample& s = ds_->samples[i];
            total += log1p_exp(-s.y * w.dot(s.x));
        }
        return total / ds_->heldout_count() + 0.5 * kRegularization * w.squaredNorm();
    }

  private:
    static double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
    static double log1p_exp(double t) {
        return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    }

    void estimate_constants() {
        // mu: 0.25 * lambda_max of the train second-moment matrix, plus reg.
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(dimension_, dimension_);
        Vec mean_grad = Vec::Zero(dimension_);
        for (int i = 0; i < ds_->train_count; ++i) {
            const Sample& s = ds_->samples[i];
            second += s.x * s.x.transpose();
            mean_grad -= 0.5 * s.y * s.x;  // per-sample gradient at w = 0
        }
        second /= ds_->train_count;
        mean_grad /= ds_->train_count;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(second, Eigen::EigenvaluesOnly);
        mu_ = 0.25 * solver.eigenvalues().maxCoeff() + kRegularization;
        double var = 0.0;
        for (int i = 0; i < ds_->train_count; ++i) {
            const Sample& s = ds_->samples[i];
            var += (Vec(-0.5 * s.y * s.x) - mean_grad).squaredNorm();
        }
        sigma_ = std::sqrt(var / ds_->train_count);
    }

    std::shared_ptr<const Dataset> ds_;
};

class MlpObjective : public Objective {
  public:
    MlpObjective(std::shared_ptr<const Dataset> ds, int input_dim, int hidden, int classes)
        : ds_(std::move(ds)), in_(input_dim), hidden_(hidden), classes_(classes) {
        dimension_ = hidden_ * in_ + hidden_ + classes_ * hidden_ + classes_;
    }

    double loss(const Vec& w, const SampleBatch& batch) const override {
        const Params p = unpack(w);
        double total = 0.0;
        for (int i : batch.indices) total += sample_loss(p, ds_->samples[i]);
        return total / batch.size();
    }

    Vec gradient(const Vec& w, const SampleBatch& batch) const override {
        const Params p = unpack(w);
        Vec g = Vec::Zero(dimension_);
        MutableParams gp = unpack_mutable(g);
        for (int i : batch.indices) accumulate_gradient(p, ds_->samples[i], gp);
        return g / batch.size();
    }

    double heldout_loss(const Vec& w) const override {
        const Params p = unpack(w);
        double total = 0.0;
        for (int i = ds_->train_count; i < static_cast<int>(ds_->samples.size()); ++i) {
            total += sample_loss(p, ds_->samples[i]);
        }
        return total / ds_->heldout_count();
    }

    int predict(const Vec& w, const Vec& x) const {
        const Params p = unpack(w);
        Eigen::VectorXd h = (p.w1 * x + p.b1).array().tanh();
        Eigen::VectorXd z = p.w2 * h + p.b2;
        int best = 0;
        z.maxCoeff(&best);
        return best;
    }

  private:
    struct Params {
        Eigen::Map<const Eigen::MatrixXd> w1;
        Eigen::Map<const Eigen::VectorXd> b1;
        Eigen::Map<const Eigen::MatrixXd> w2;
        Eigen::Map<const Eigen::VectorXd> b2;
    };
    struct MutableParams {
        Eigen::Map<Eigen::MatrixXd> w1;
        Eigen::Map<Eigen::VectorXd> b1;
        Eigen::Map<Eigen::MatrixXd> w2;
        Eigen::Map<Eigen::VectorXd> b2;
    };

    Params unpack(const Vec& w) const {
        const double* d = w.data();
        return Params{{d, hidden_, in_},
                      {d + hidden_ * in_, hidden_},
                      {d + hidden_ * in_ + hidden_, classes_, hidden_},
                      {d + hidden_ * in_ + hidden_ + classes_ * hidden_, classes_}};
    }

    MutableParams unpack_mutable(Vec& w) const {
        double* d = w.data();
        return MutableParams{{d, hidden_, in_},
                             {d + hidden_ * in_, hidden_},
                             {d + hidden_ * in_ + hidden_, classes_, hidden_},
                             {d + hidden_ * in_ + hidden_ + classes_ * hidden_, classes_}};
    }

    static Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
        const Eigen::ArrayXd shifted = z.array() - z.maxCoeff();
        const Eigen::ArrayXd e = shifted.exp();
        return (e / e.sum()).matrix();
    }

    double sample_loss(const Params& p, const Sample& s) const {
        Eigen::VectorXd h = (p.w1 * s.x + p.b1).array().tanh();
        Eigen::VectorXd z = p.w2 * h + p.b2;
        const double zmax = z.maxCoeff();
        const double logsum = zmax + std::log((z.array() - zmax).exp().sum());
        return logsum - z[s.label];
    }

    void accumulate_gradient(const Params& p, const Sample& s, MutableParams& g) const {
        Eigen::VectorXd h = (p.w1 * s.x + p.b1).array().tanh();
        Eigen::VectorXd prob = softmax(p.w2 * h + p.b2);
        prob[s.label] -= 1.0;  // dL/dz2
        g.w2 += prob * h.transpose();
        g.b2 += prob;
        Eigen::VectorXd dh = p.w2.transpose() * prob;
        Eigen::VectorXd dz1 = dh.array() * (1.0 - h.array().square());
        g.w1 += dz1 * s.x.transpose();
        g.b1 += dz1;
    }

    std::shared_ptr<const Dataset> ds_;
    int in_, hidden_, classes_;
};

}  // namespace

SampleBatch sample_batch(const Dataset& ds, int batch_size, Rng& rng) {
    if (batch_size < 1) throw InvalidStateError("batch size must be >= 1");
    if (ds.train_count < 1) throw InvalidStateError("dataset has no training samples");
    SampleBatch b;
    b.indices.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        b.indices.push_back(static_cast<int>(
            rng.next_below(static_cast<std::uint64_t>(ds.train_count))));
    }
    return b;
}

Problem make_quadratic(int dimension, double condition_number, double noise_sigma,
                       std::uint64_t seed, int sample_count) {
    if (dimension < 1 || condition_number < 1.0 || noise_sigma < 0.0) {
        throw InvalidStateError("make_quadratic: invalid parameters");
    }
    Rng rng(derive_seed(seed, 1));
    // A = Q diag(spectrum) Q^T with spectrum log-spaced over [1, condition_number].
    Vec spectrum(dimension);
    for (int i = 0; i < dimension; ++i) {
        const double t = dimension == 1 ? 1.0 : static_cast<double>(i) / (dimension - 1);
        spectrum[i] = std::pow(condition_number, t);
    }
    Eigen::MatrixXd gaussian(dimension, dimension);
    for (int i = 0; i < dimension; ++i) gaussian.col(i) = gaussian_vector(dimension, rng);
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ();
    Eigen::MatrixXd a = q * spectrum.asDiagonal() * q.transpose();
    a = 0.5 * (a + a.transpose());  // symmetrize exactly
    Vec w_star = gaussian_vector(dimension, rng);

    auto ds = std::make_shared<Dataset>();
    ds->generator = "quadratic";
    ds->seed = seed;
    ds->heldout_fraction = 0.1;
    ds->samples.resize(sample_count);
    for (auto& s : ds->samples) {
        s.x = noise_sigma * gaussian_vector(dimension, rng);
    }
    ds->train_count = split_train_count(sample_count, ds->heldout_fraction);

    const double sigma = noise_sigma * std::sqrt(static_cast<double>(dimension));
    Problem problem;
    problem.dataset = ds;
    problem.objective = std::make_shared<QuadraticObjective>(
        std::move(a), std::move(w_star), ds, condition_number, sigma);
    return problem;
}

Problem make_logistic(int dimension, int sample_count, std::uint64_t seed) {
    if (dimension < 1 || sample_count < 10) {
        throw InvalidStateError("make_logistic: requires dimension >= 1, samples >= 10");
    }
    Rng rng(derive_seed(seed, 2));
    Vec w_true = gaussian_vector(dimension, rng);
    w_true *= 3.0 / w_true.norm();

    auto ds = std::make_shared<Dataset>();
    ds->generator = "logistic";
    ds->seed = seed;
    ds->heldout_fraction = 0.1;
    ds->samples.resize(sample_count);
    for (auto& s : ds->samples) {
        s.x = gaussian_vector(dimension, rng);
        const double margin = w_true.dot(s.x) + 0.5 * rng.next_gaussian();
        s.y = margin >= 0.0 ? 1.0 : -1.0;
        s.label = s.y > 0 ? 1 : 0;
    }
    ds->train_count = split_train_count(sample_count, ds->heldout_fraction);

    Problem problem;
    problem.dataset = ds;
    problem.objective = std::make_shared<LogisticObjective>(ds, dimension);
    return problem;
}

Problem make_mlp(int input_dim, int hidden, int classes, int sample_count,
                 std::uint64_t seed) {
    if (input_dim < 1 || hidden < 1 || classes < 1 || sample_count < classes) {
        throw InvalidStateError("make_mlp: invalid dimensions");
    }
    Rng rng(derive_seed(seed, 3));
    // Cluster centers on signed coordinate axes: well separated for
    // classes <= 2 * input_dim, random directions beyond that.
    std::vector<Vec> centers(classes);
    const double radius = 4.0;
    for (int c = 0; c < classes; ++c) {
        if (c < 2 * input_dim) {
            centers[c] = Vec::Zero(input_dim);
            centers[c][c % input_dim] = (c < input_dim) ? radius : -radius;
        } else {
            centers[c] = gaussian_vector(input_dim, rng);
            centers[c] *= radius / centers[c].norm();
        }
    }

    auto ds = std::make_shared<Dataset>();
    ds->generator = "mlp";
    ds->seed = seed;
    ds->heldout_fraction = 0.1;
    ds->samples.resize(sample_count);
    for (auto& s : ds->samples) {
        s.label = static_cast<int>(rng.next_below(classes));
        s.x = centers[s.label] + 0.6 * gaussian_vector(input_dim, rng);
        s.y = s.label;
    }
    ds->train_count = split_train_count(sample_count, ds->heldout_fraction);

    Problem problem;
    problem.dataset = ds;
    problem.objective = std::make_shared<MlpObjective>(ds, input_dim, hidden, classes);
    return problem;
}

double mlp_train_accuracy(const Problem& problem, const Vec& w) {
    const auto* mlp = dynamic_cast<const MlpObjective*>(problem.objective.get());
    if (mlp == nullptr) throw InvalidStateError("mlp_train_accuracy: not an MLP problem");
    int correct = 0;
    for (int i = 0; i < problem.dataset->train_count; ++i) {
        if (mlp->predict(w, problem.dataset->samples[i].x) ==
            problem.dataset->samples[i].label) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / problem.dataset->train_count;
}

}  // namespace adpsgd::objectives
