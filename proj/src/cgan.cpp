#include "dyadgen/cgan.hpp"

#include <cmath>

#include "dyadgen/io_text.hpp"

namespace dyadgen {

namespace {

constexpr double kLeak = 0.2;
constexpr double kClampLo = 1e-7;
constexpr double kClampHi = 1.0 - 1e-7;

double leaky(double v) { return v > 0.0 ? v : kLeak * v; }
double leaky_grad(double v) { return v > 0.0 ? 1.0 : kLeak; }

// Sigmoid output kept strictly inside (0, 1); IEEE sigmoid saturates to
// exactly 1.0 past ~37.
double bounded_sigmoid(double v) {
    return std::min(std::max(1.0 / (1.0 + std::exp(-v)), kClampLo), kClampHi);
}

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() + b.size());
    out << a, b;
    return out;
}

void adam_update(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, Eigen::VectorXd& m,
                 Eigen::VectorXd& v, long step, const CGanConfig& cfg, double eps) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    theta -= (cfg.learning_rate * (m / bc1).array() / ((v / bc2).array().sqrt() + eps)).matrix();
}

}  // namespace

MlpNet MlpNet::init(const std::vector<int>& layer_sizes, bool sigmoid_output, Rng& rng) {
    if (layer_sizes.size() < 3) throw UsageError("MLP needs at least one hidden layer");
    MlpNet net;
    net.sigmoid_output = sigmoid_output;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int in = layer_sizes[l], out = layer_sizes[l + 1];
        if (in < 1 || out < 1) throw UsageError("MLP layer sizes must be >= 1");
        Eigen::MatrixXd w(out, in);
        const double r = std::sqrt(6.0 / (in + out));
        for (int j = 0; j < in; ++j)
            for (int i = 0; i < out; ++i) w(i, j) = rng.uniform(-r, r);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return net;
}

Eigen::VectorXd MlpNet::forward(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim()) throw DataError("MLP input dimension mismatch");
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Eigen::VectorXd z = weights[l] * a + biases[l];
        if (l + 1 < weights.size()) {
            a = z.unaryExpr([](double v) { return leaky(v); });
        } else if (sigmoid_output) {
            a = z.unaryExpr([](double v) { return bounded_sigmoid(v); });
        } else {
            a = std::move(z);
        }
    }
    return a;
}

int MlpNet::n_params() const {
    int n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += static_cast<int>(weights[l].size() + biases[l].size());
    return n;
}

Eigen::VectorXd MlpNet::pack() const {
    Eigen::VectorXd flat(n_params());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.segment(at, weights[l].size()) =
            Eigen::Map<const Eigen::VectorXd>(weights[l].data(), weights[l].size());
        at += weights[l].size();
        flat.segment(at, biases[l].size()) = biases[l];
        at += biases[l].size();
    }
    return flat;
}

void MlpNet::unpack(const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Eigen::Map<Eigen::VectorXd>(weights[l].data(), weights[l].size()) =
            flat.segment(at, weights[l].size());
        at += weights[l].size();
        biases[l] = flat.segment(at, biases[l].size());
        at += biases[l].size();
    }
    if (at != flat.size()) throw DataError("MLP parameter vector size mismatch");
}

Eigen::VectorXd MlpNet::backward(const Eigen::VectorXd& x, const Eigen::VectorXd& d_out,
                                 Eigen::VectorXd& grad_flat, bool d_out_is_preactivation) const {
    const std::size_t n_layers = weights.size();
    std::vector<Eigen::VectorXd> acts(n_layers + 1);
    std::vector<Eigen::VectorXd> pre(n_layers);
    acts[0] = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = weights[l] * acts[l] + biases[l];
        if (l + 1 < n_layers)
            acts[l + 1] = pre[l].unaryExpr([](double v) { return leaky(v); });
        else if (sigmoid_output)
            acts[l + 1] = pre[l].unaryExpr([](double v) { return bounded_sigmoid(v); });
        else
            acts[l + 1] = pre[l];
    }

    if (grad_flat.size() != n_params()) grad_flat = Eigen::VectorXd::Zero(n_params());

    Eigen::VectorXd dz;
    if (sigmoid_output && !d_out_is_preactivation) {
        const Eigen::VectorXd& a = acts[n_layers];
        dz = d_out.cwiseProduct(a.cwiseProduct(Eigen::VectorXd::Ones(a.size()) - a));
    } else {
        dz = d_out;
    }

    // Walk layers backward; grad_flat segments follow the pack() layout.
    std::vector<Eigen::Index> offsets(n_layers);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = at;
        at += weights[l].size() + biases[l].size();
    }
    for (std::size_t li = n_layers; li-- > 0;) {
        const Eigen::MatrixXd dw = dz * acts[li].transpose();
        Eigen::Map<Eigen::VectorXd>(grad_flat.data() + offsets[li], dw.size()) +=
            Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size());
        grad_flat.segment(offsets[li] + dw.size(), dz.size()) += dz;
        Eigen::VectorXd da = weights[li].transpose() * dz;
        if (li > 0) dz = da.cwiseProduct(pre[li - 1].unaryExpr([](double v) { return leaky_grad(v); }));
        else return da;
    }
    return Eigen::VectorXd();
}

CGanModel CGanModel::init(const CGanConfig& cfg) {
    if (cfg.data_dim < 1 || cfg.z_dim < 1 || cfg.hidden < 1)
        throw UsageError("CGAN dimensions must be >= 1");
    CGanModel model;
    model.config = cfg;
    Rng rng(Rng::derive(cfg.seed, 0x6a9));
    model.g = MlpNet::init({kAffectClassCount + cfg.z_dim, cfg.hidden, cfg.hidden, cfg.data_dim},
                           false, rng);
    model.d = MlpNet::init({kAffectClassCount + cfg.data_dim, cfg.hidden, cfg.hidden, 1}, true, rng);
    model.adam_m_d = Eigen::VectorXd::Zero(model.d.n_params());
    model.adam_v_d = Eigen::VectorXd::Zero(model.d.n_params());
    model.adam_m_g = Eigen::VectorXd::Zero(model.g.n_params());
    model.adam_v_g = Eigen::VectorXd::Zero(model.g.n_params());
    model.standardizer.mean = Eigen::VectorXd::Zero(cfg.data_dim);
    model.standardizer.std_dev = Eigen::VectorXd::Ones(cfg.data_dim);
    return model;
}

ZSource gaussian_z_source(int z_dim) {
    return [z_dim](const AffectVector&, Rng& rng) {
        Eigen::VectorXd z(z_dim);
        for (int j = 0; j < z_dim; ++j) z[j] = rng.normal();
        return z;
    };
}

namespace {

double clamped(double p) { return std::min(std::max(p, kClampLo), kClampHi); }

}  // namespace

double d_loss(const CGanModel& model, const std::vector<ConditionedSample>& batch,
              const std::vector<Eigen::VectorXd>& z_batch) {
    if (batch.empty()) throw DataError("empty discriminator batch");
    if (batch.size() != z_batch.size()) throw DataError("z batch size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double p_real = clamped(model.d.forward(concat(batch[i].affect, batch[i].shape))[0]);
        const Eigen::VectorXd fake = model.g.forward(concat(batch[i].affect, z_batch[i]));
        const double p_fake = clamped(model.d.forward(concat(batch[i].affect, fake))[0]);
        acc += std::log(p_real) + std::log(1.0 - p_fake);
    }
    return -acc / static_cast<double>(batch.size());
}

double g_loss(const CGanModel& model, const std::vector<AffectVector>& x_batch,
              const std::vector<Eigen::VectorXd>& z_batch) {
    if (x_batch.empty()) throw DataError("empty generator batch");
    if (x_batch.size() != z_batch.size()) throw DataError("z batch size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x_batch.size(); ++i) {
        const Eigen::VectorXd fake = model.g.forward(concat(x_batch[i], z_batch[i]));
        acc += std::log(clamped(model.d.forward(concat(x_batch[i], fake))[0]));
    }
    return -acc / static_cast<double>(x_batch.size());
}

double d_loss_grad(const CGanModel& model, const std::vector<ConditionedSample>& batch,
                   const std::vector<Eigen::VectorXd>& z_batch, Eigen::VectorXd& grad_d) {
    if (batch.empty()) throw DataError("empty discriminator batch");
    if (batch.size() != z_batch.size()) throw DataError("z batch size mismatch");
    grad_d = Eigen::VectorXd::Zero(model.d.n_params());
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double acc = 0.0;
    Eigen::VectorXd d_pre(1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Eigen::VectorXd real_in = concat(batch[i].affect, batch[i].shape);
        const double p_real = model.d.forward(real_in)[0];
        acc += std::log(p_real);
        // d(-log sigmoid(a))/da = -(1 - p): exact even when p saturates
        d_pre[0] = -inv_b * (1.0 - p_real);
        model.d.backward(real_in, d_pre, grad_d, true);

        const Eigen::VectorXd fake = model.g.forward(concat(batch[i].affect, z_batch[i]));
        const Eigen::VectorXd fake_in = concat(batch[i].affect, fake);
        const double p_fake = model.d.forward(fake_in)[0];
        acc += std::log(1.0 - p_fake);
        d_pre[0] = inv_b * p_fake;
        model.d.backward(fake_in, d_pre, grad_d, true);
    }
    return -acc * inv_b;
}

double g_loss_grad(const CGanModel& model, const std::vector<AffectVector>& x_batch,
                   const std::vector<Eigen::VectorXd>& z_batch, Eigen::VectorXd& grad_g) {
    if (x_batch.empty()) throw DataError("empty generator batch");
    if (x_batch.size() != z_batch.size()) throw DataError("z batch size mismatch");
    grad_g = Eigen::VectorXd::Zero(model.g.n_params());
    const double inv_b = 1.0 / static_cast<double>(x_batch.size());
    double acc = 0.0;
    Eigen::VectorXd d_pre(1);
    Eigen::VectorXd scratch;  // discriminator grads, discarded
    for (std::size_t i = 0; i < x_batch.size(); ++i) {
        const Eigen::VectorXd g_in = concat(x_batch[i], z_batch[i]);
        const Eigen::VectorXd fake = model.g.forward(g_in);
        const Eigen::VectorXd fake_in = concat(x_batch[i], fake);
        const double p = model.d.forward(fake_in)[0];
        acc += std::log(p);
        d_pre[0] = -inv_b * (1.0 - p);
        scratch = Eigen::VectorXd::Zero(model.d.n_params());
        const Eigen::VectorXd d_input = model.d.backward(fake_in, d_pre, scratch, true);
        model.g.backward(g_in, d_input.tail(model.config.data_dim), grad_g);
    }
    return -acc * inv_b;
}

StepLosses train_step(CGanModel& model, const std::vector<ConditionedSample>& real_batch, Rng& rng,
                      const ZSource& z_source) {
    if (real_batch.size() < 2) throw DataError("train_step needs a batch of >= 2 samples");
    const ZSource source = z_source ? z_source : gaussian_z_source(model.config.z_dim);
    const std::size_t b = real_batch.size();

    auto draw_z = [&]() {
        std::vector<Eigen::VectorXd> z(b);
        for (std::size_t i = 0; i < b; ++i) z[i] = source(real_batch[i].affect, rng);
        return z;
    };
    std::vector<AffectVector> x_batch(b);
    for (std::size_t i = 0; i < b; ++i) x_batch[i] = real_batch[i].affect;

    StepLosses losses;
    Eigen::VectorXd grad;

    losses.d = d_loss_grad(model, real_batch, draw_z(), grad);
    if (!std::isfinite(losses.d))
        throw NumericalError("NaN discriminator loss at step " + std::to_string(model.steps));
    Eigen::VectorXd theta = model.d.pack();
    ++model.d_updates;
    adam_update(theta, grad, model.adam_m_d, model.adam_v_d, model.d_updates, model.config,
                model.config.adam_eps_d);
    model.d.unpack(theta);

    for (int rep = 0; rep < 2; ++rep) {
        losses.g = g_loss_grad(model, x_batch, draw_z(), grad);
        if (!std::isfinite(losses.g))
            throw NumericalError("NaN generator loss at step " + std::to_string(model.steps));
        theta = model.g.pack();
        ++model.g_updates;
        adam_update(theta, grad, model.adam_m_g, model.adam_v_g, model.g_updates, model.config,
                    model.config.adam_eps_g);
        model.g.unpack(theta);
    }
    ++model.steps;
    return losses;
}

std::vector<Eigen::VectorXd> generate(const CGanModel& model, const AffectVector& affect, int count,
                                      Rng& rng, const std::optional<Eigen::VectorXd>& z,
                                      const ZSource& z_source) {
    if (count < 0) throw UsageError("count must be >= 0");
    const ZSource source = z_source ? z_source : gaussian_z_source(model.config.z_dim);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(model.g.forward(concat(affect, z ? *z : source(affect, rng))));
    return out;
}

void save_cgan(const CGanModel& model, const std::string& path) {
    auto out = open_output(path);
    out << "CGAN v1\n";
    out << "data_dim " << model.config.data_dim << "\n";
    out << "z_dim " << model.config.z_dim << "\n";
    out << "hidden " << model.config.hidden << "\n";
    out << "learning_rate " << g17(model.config.learning_rate) << "\n";
    out << "beta1 " << g17(model.config.beta1) << "\n";
    out << "beta2 " << g17(model.config.beta2) << "\n";
    out << "batch_size " << model.config.batch_size << "\n";
    out << "seed " << model.config.seed << "\n";
    out << "steps " << model.steps << "\n";
    for (int j = 0; j < model.config.data_dim; ++j)
        out << (j ? " " : "") << g17(model.standardizer.mean[j]);
    out << "\n";
    for (int j = 0; j < model.config.data_dim; ++j)
        out << (j ? " " : "") << g17(model.standardizer.std_dev[j]);
    out << "\n";
    const Eigen::VectorXd gd = model.g.pack();
    out << "g_params " << gd.size() << "\n";
    for (Eigen::Index i = 0; i < gd.size(); ++i) out << g17(gd[i]) << "\n";
    const Eigen::VectorXd dd = model.d.pack();
    out << "d_params " << dd.size() << "\n";
    for (Eigen::Index i = 0; i < dd.size(); ++i) out << g17(dd[i]) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

CGanModel load_cgan(const std::string& path) {
    auto in = open_input(path);
    TokenReader tr(in, path);
    tr.expect("CGAN");
    tr.expect("v1");
    CGanConfig cfg;
    tr.expect("data_dim");
    cfg.data_dim = static_cast<int>(tr.next_int());
    tr.expect("z_dim");
    cfg.z_dim = static_cast<int>(tr.next_int());
    tr.expect("hidden");
    cfg.hidden = static_cast<int>(tr.next_int());
    tr.expect("learning_rate");
    cfg.learning_rate = tr.next_double();
    tr.expect("beta1");
    cfg.beta1 = tr.next_double();
    tr.expect("beta2");
    cfg.beta2 = tr.next_double();
    tr.expect("batch_size");
    cfg.batch_size = static_cast<int>(tr.next_int());
    tr.expect("seed");
    cfg.seed = static_cast<std::uint64_t>(tr.next_int());
    CGanModel model = CGanModel::init(cfg);
    tr.expect("steps");
    model.steps = tr.next_int();
    for (int j = 0; j < cfg.data_dim; ++j) model.standardizer.mean[j] = tr.next_double();
    for (int j = 0; j < cfg.data_dim; ++j) model.standardizer.std_dev[j] = tr.next_double();
    tr.expect("g_params");
    long n = tr.next_int();
    if (n != model.g.n_params()) tr.fail("generator parameter count mismatch");
    Eigen::VectorXd flat(n);
    for (long i = 0; i < n; ++i) flat[i] = tr.next_double();
    model.g.unpack(flat);
    tr.expect("d_params");
    n = tr.next_int();
    if (n != model.d.n_params()) tr.fail("discriminator parameter count mismatch");
    flat.resize(n);
    for (long i = 0; i < n; ++i) flat[i] = tr.next_double();
    model.d.unpack(flat);
    return model;
}

}  // namespace dyadgen
