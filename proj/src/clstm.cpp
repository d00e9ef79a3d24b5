#include "dyadgen/clstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dyadgen/io_text.hpp"
#include "dyadgen/rng.hpp"

namespace dyadgen {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct StepCache {
    Eigen::VectorXd x, i, f, o, g, c, tanh_c, h, c_prev, h_prev;
};

Eigen::VectorXd lstm_output(const CLstmModel& m, const Eigen::VectorXd& h) { return m.v * h + m.c; }

// One recurrence step; fills the cache needed for the backward pass.
void lstm_step(const CLstmModel& m, const Eigen::VectorXd& x, LstmState& state, StepCache* cache) {
    const Eigen::VectorXd i = sigmoid(m.w_i * x + m.u_i * state.h + m.b_i);
    const Eigen::VectorXd f = sigmoid(m.w_f * x + m.u_f * state.h + m.b_f);
    const Eigen::VectorXd o = sigmoid(m.w_o * x + m.u_o * state.h + m.b_o);
    const Eigen::VectorXd g = (m.w_g * x + m.u_g * state.h + m.b_g).array().tanh();
    const Eigen::VectorXd c_new = f.cwiseProduct(state.c) + i.cwiseProduct(g);
    const Eigen::VectorXd tanh_c = c_new.array().tanh();
    const Eigen::VectorXd h_new = o.cwiseProduct(tanh_c);
    if (cache) {
        cache->x = x;
        cache->i = i;
        cache->f = f;
        cache->o = o;
        cache->g = g;
        cache->c = c_new;
        cache->tanh_c = tanh_c;
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->h = h_new;
    }
    state.c = c_new;
    state.h = h_new;
}

void zero_like(const CLstmModel& m, CLstmGrads& g) {
    g.w_i = Eigen::MatrixXd::Zero(m.w_i.rows(), m.w_i.cols());
    g.w_f = g.w_o = g.w_g = g.w_i;
    g.u_i = Eigen::MatrixXd::Zero(m.u_i.rows(), m.u_i.cols());
    g.u_f = g.u_o = g.u_g = g.u_i;
    g.b_i = Eigen::VectorXd::Zero(m.b_i.size());
    g.b_f = g.b_o = g.b_g = g.b_i;
    g.v = Eigen::MatrixXd::Zero(m.v.rows(), m.v.cols());
    g.c = Eigen::VectorXd::Zero(m.c.size());
}

template <typename T>
Eigen::VectorXd pack_tensors(const T& t) {
    const Eigen::MatrixXd* mats[] = {&t.w_i, &t.w_f, &t.w_o, &t.w_g, &t.u_i, &t.u_f,
                                     &t.u_o, &t.u_g, &t.v};
    const Eigen::VectorXd* vecs[] = {&t.b_i, &t.b_f, &t.b_o, &t.b_g, &t.c};
    Eigen::Index total = 0;
    for (auto* m : mats) total += m->size();
    for (auto* v : vecs) total += v->size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    for (auto* m : mats) {
        flat.segment(at, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
        at += m->size();
    }
    for (auto* v : vecs) {
        flat.segment(at, v->size()) = *v;
        at += v->size();
    }
    return flat;
}

}  // namespace

CLstmModel CLstmModel::init(const CLstmConfig& cfg) {
    if (cfg.input_dim < 1 || cfg.hidden_dim < 1 || cfg.output_dim < 1 || cfg.window < 1)
        throw UsageError("all C-LSTM dimensions and the window must be >= 1");
    CLstmModel m;
    m.config = cfg;
    const int h = cfg.hidden_dim, in = cfg.input_dim, out = cfg.output_dim;
    Rng rng(Rng::derive(cfg.seed, 0x157));
    const double r = 1.0 / std::sqrt(static_cast<double>(h));
    auto fill = [&](Eigen::MatrixXd& w, int rows, int cols) {
        w.resize(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) w(i, j) = rng.uniform(-r, r);
    };
    fill(m.w_i, h, in);
    fill(m.w_f, h, in);
    fill(m.w_o, h, in);
    fill(m.w_g, h, in);
    fill(m.u_i, h, h);
    fill(m.u_f, h, h);
    fill(m.u_o, h, h);
    fill(m.u_g, h, h);
    fill(m.v, out, h);
    m.b_i = Eigen::VectorXd::Zero(h);
    m.b_f = Eigen::VectorXd::Ones(h);  // forget gate open at init
    m.b_o = Eigen::VectorXd::Zero(h);
    m.b_g = Eigen::VectorXd::Zero(h);
    m.c = Eigen::VectorXd::Zero(out);
    m.standardizer.mean = Eigen::VectorXd::Zero(out);
    m.standardizer.std_dev = Eigen::VectorXd::Ones(out);
    return m;
}

int CLstmModel::n_params() const {
    return static_cast<int>(4 * (w_i.size() + u_i.size() + b_i.size()) + v.size() + c.size());
}

Eigen::VectorXd CLstmModel::pack() const { return pack_tensors(*this); }

Eigen::VectorXd CLstmGrads::pack() const { return pack_tensors(*this); }

void CLstmModel::unpack(const Eigen::VectorXd& flat) {
    Eigen::MatrixXd* mats[] = {&w_i, &w_f, &w_o, &w_g, &u_i, &u_f, &u_o, &u_g, &v};
    Eigen::VectorXd* vecs[] = {&b_i, &b_f, &b_o, &b_g, &c};
    Eigen::Index at = 0;
    for (auto* m : mats) {
        Eigen::Map<Eigen::VectorXd>(m->data(), m->size()) = flat.segment(at, m->size());
        at += m->size();
    }
    for (auto* v2 : vecs) {
        *v2 = flat.segment(at, v2->size());
        at += v2->size();
    }
    if (at != flat.size()) throw DataError("parameter vector size mismatch");
}

std::vector<Eigen::VectorXd> forward(const CLstmModel& model,
                                     const std::vector<Eigen::VectorXd>& inputs, LstmState* state) {
    LstmState local;
    LstmState& st = state ? *state : local;
    if (st.h.size() == 0) st.h = Eigen::VectorXd::Zero(model.config.hidden_dim);
    if (st.c.size() == 0) st.c = Eigen::VectorXd::Zero(model.config.hidden_dim);
    std::vector<Eigen::VectorXd> outputs;
    outputs.reserve(inputs.size());
    for (const auto& x : inputs) {
        if (x.size() != model.config.input_dim)
            throw DataError("input dimension " + std::to_string(x.size()) + " != " +
                            std::to_string(model.config.input_dim));
        lstm_step(model, x, st, nullptr);
        outputs.push_back(lstm_output(model, st.h));
    }
    return outputs;
}

double bptt_gradients(const CLstmModel& model, const std::vector<Eigen::VectorXd>& inputs,
                      const std::vector<Eigen::VectorXd>& targets, CLstmGrads& grads) {
    if (inputs.size() != targets.size()) throw DataError("inputs/targets length mismatch");
    zero_like(model, grads);
    const int t_len = static_cast<int>(inputs.size());
    if (t_len == 0) return 0.0;
    const int out = model.config.output_dim;

    std::vector<StepCache> cache(t_len);
    LstmState st{Eigen::VectorXd::Zero(model.config.hidden_dim),
                 Eigen::VectorXd::Zero(model.config.hidden_dim)};
    double loss = 0.0;
    std::vector<Eigen::VectorXd> dy(t_len);
    const double norm = 1.0 / (static_cast<double>(t_len) * out);
    for (int t = 0; t < t_len; ++t) {
        if (inputs[t].size() != model.config.input_dim || targets[t].size() != out)
            throw DataError("window dimension mismatch at step " + std::to_string(t));
        lstm_step(model, inputs[t], st, &cache[t]);
        const Eigen::VectorXd y = lstm_output(model, st.h);
        const Eigen::VectorXd r = y - targets[t];
        loss += r.squaredNorm() * norm;
        dy[t] = 2.0 * norm * r;
    }
    if (!std::isfinite(loss)) throw NumericalError("NaN/inf loss in BPTT");

    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(model.config.hidden_dim);
    Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(model.config.hidden_dim);
    for (int t = t_len - 1; t >= 0; --t) {
        const StepCache& s = cache[t];
        grads.v += dy[t] * s.h.transpose();
        grads.c += dy[t];
        const Eigen::VectorXd dh = model.v.transpose() * dy[t] + dh_next;

        const Eigen::VectorXd d_o = dh.cwiseProduct(s.tanh_c);
        const Eigen::VectorXd dc =
            dh.cwiseProduct(s.o).cwiseProduct(Eigen::VectorXd::Ones(s.c.size()) -
                                              s.tanh_c.cwiseProduct(s.tanh_c)) +
            dc_next;
        const Eigen::VectorXd d_i = dc.cwiseProduct(s.g);
        const Eigen::VectorXd d_g = dc.cwiseProduct(s.i);
        const Eigen::VectorXd d_f = dc.cwiseProduct(s.c_prev);
        dc_next = dc.cwiseProduct(s.f);

        const Eigen::VectorXd ai = d_i.cwiseProduct(s.i).cwiseProduct(Eigen::VectorXd::Ones(s.i.size()) - s.i);
        const Eigen::VectorXd af = d_f.cwiseProduct(s.f).cwiseProduct(Eigen::VectorXd::Ones(s.f.size()) - s.f);
        const Eigen::VectorXd ao = d_o.cwiseProduct(s.o).cwiseProduct(Eigen::VectorXd::Ones(s.o.size()) - s.o);
        const Eigen::VectorXd ag = d_g.cwiseProduct(Eigen::VectorXd::Ones(s.g.size()) - s.g.cwiseProduct(s.g));

        grads.w_i += ai * s.x.transpose();
        grads.w_f += af * s.x.transpose();
        grads.w_o += ao * s.x.transpose();
        grads.w_g += ag * s.x.transpose();
        grads.u_i += ai * s.h_prev.transpose();
        grads.u_f += af * s.h_prev.transpose();
        grads.u_o += ao * s.h_prev.transpose();
        grads.u_g += ag * s.h_prev.transpose();
        grads.b_i += ai;
        grads.b_f += af;
        grads.b_o += ao;
        grads.b_g += ag;

        dh_next = model.u_i.transpose() * ai + model.u_f.transpose() * af +
                  model.u_o.transpose() * ao + model.u_g.transpose() * ag;
    }
    return loss;
}

namespace {

struct Window {
    std::vector<Eigen::VectorXd> inputs, targets;
};

std::vector<Window> make_windows(const Corpus& corpus, const CLstmConfig& cfg,
                                 const Standardizer& std_tf) {
    std::vector<Window> windows;
    const int n = cfg.window;
    for (const auto& seq : corpus.sequences) {
        const int len = static_cast<int>(seq.frames.size());
        for (int start = 0; start + n < len; start += n) {
            Window w;
            w.inputs.reserve(n);
            w.targets.reserve(n);
            AffectVector agg = AffectVector::Zero();
            if (cfg.aggregate_affect) {
                for (int t = start; t < start + n; ++t) agg += seq.frames[t].partner_affect;
                agg /= static_cast<double>(n);
            }
            for (int t = start; t < start + n; ++t) {
                Eigen::VectorXd x(cfg.input_dim);
                x.head<kAffectClassCount>() =
                    cfg.aggregate_affect ? agg : seq.frames[t].partner_affect;
                x.tail(cfg.output_dim) = std_tf.apply(seq.frames[t].agent_shape.flatten());
                w.inputs.push_back(std::move(x));
                w.targets.push_back(std_tf.apply(seq.frames[t + 1].agent_shape.flatten()));
            }
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

}  // namespace

TrainReport train(CLstmModel& model, const Corpus& corpus, const CLstmConfig& cfg,
                  const Standardizer& standardizer) {
    if (cfg.input_dim != kAffectClassCount + cfg.output_dim)
        throw UsageError("input_dim must equal 8 + output_dim");
    if (standardizer.dim() != cfg.output_dim) throw UsageError("standardizer dim mismatch");
    model.config = cfg;
    model.standardizer = standardizer;

    std::vector<Window> windows = make_windows(corpus, cfg, standardizer);
    if (windows.empty())
        throw DataError("corpus has no window of " + std::to_string(cfg.window + 1) + " frames");

    TrainReport report;
    report.windows_per_epoch = static_cast<int>(windows.size());

    Eigen::VectorXd theta = model.pack();
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    Rng rng(Rng::derive(cfg.seed, 0x7a41));
    std::vector<int> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    CLstmGrads grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_loss = 0.0;
        for (const int wi : order) {
            const double loss = bptt_gradients(model, windows[wi].inputs, windows[wi].targets, grads);
            epoch_loss += loss;
            Eigen::VectorXd g = grads.pack();
            const double gnorm = g.norm();
            if (cfg.grad_clip > 0.0 && gnorm > cfg.grad_clip) g *= cfg.grad_clip / gnorm;
            ++step;
            m1 = beta1 * m1 + (1.0 - beta1) * g;
            m2 = beta2 * m2.array().matrix() + (1.0 - beta2) * g.cwiseProduct(g);
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            theta -= (cfg.learning_rate * (m1 / bc1).array() / ((m2 / bc2).array().sqrt() + eps))
                         .matrix();
            model.unpack(theta);
        }
        report.epoch_loss.push_back(epoch_loss / static_cast<double>(windows.size()));
    }
    return report;
}

std::vector<ShapeParams> generate(const CLstmModel& model, const std::vector<DyadFrame>& history,
                                  const std::vector<AffectVector>& affect_stream, int steps,
                                  GenerationMode mode) {
    const int n = model.config.window;
    const int d = model.config.output_dim;
    if (static_cast<int>(history.size()) != n)
        throw DataError("history must hold exactly " + std::to_string(n) + " frames, got " +
                        std::to_string(history.size()));
    if (steps < 0) throw UsageError("steps must be >= 0");
    if (static_cast<int>(affect_stream.size()) < steps)
        throw DataError("affect stream shorter than requested steps");

    std::vector<ShapeParams> out;
    out.reserve(steps);
    if (steps == 0) return out;

    auto input_of = [&](const AffectVector& a, const Eigen::VectorXd& std_shape) {
        Eigen::VectorXd x(model.config.input_dim);
        x.head<kAffectClassCount>() = a;
        x.tail(d) = std_shape;
        return x;
    };

    std::vector<Eigen::VectorXd> window;
    window.reserve(n);
    for (const auto& f : history)
        window.push_back(input_of(f.partner_affect, model.standardizer.apply(f.agent_shape.flatten())));

    auto emit = [&](const Eigen::VectorXd& std_shape) {
        out.push_back(ShapeParams::unflatten(model.standardizer.invert(std_shape)));
    };

    if (mode == GenerationMode::Overlap) {
        for (int k = 0; k < steps; ++k) {
            const std::vector<Eigen::VectorXd> ys = forward(model, window);
            const Eigen::VectorXd y = ys.back();
            emit(y);
            window.erase(window.begin());
            window.push_back(input_of(affect_stream[k], y));
        }
        return out;
    }

    // NonOverlap: each block re-encodes the previous block's frames once and
    // free-runs for the remainder; state resets between blocks.
    int k = 0;
    while (k < steps) {
        LstmState state;
        const std::vector<Eigen::VectorXd> ys = forward(model, window, &state);
        Eigen::VectorXd y = ys.back();
        std::vector<Eigen::VectorXd> block_inputs;
        block_inputs.reserve(n);
        emit(y);
        block_inputs.push_back(input_of(affect_stream[k], y));
        ++k;
        for (int j = 1; j < n && k < steps; ++j, ++k) {
            lstm_step(model, block_inputs.back(), state, nullptr);
            y = lstm_output(model, state.h);
            emit(y);
            block_inputs.push_back(input_of(affect_stream[k], y));
        }
        window = std::move(block_inputs);
        if (static_cast<int>(window.size()) < n) break;  // final partial block
    }
    return out;
}

void save_clstm(const CLstmModel& model, const std::string& path) {
    auto out = open_output(path);
    out << "CLSTM v1\n";
    out << "input_dim " << model.config.input_dim << "\n";
    out << "hidden_dim " << model.config.hidden_dim << "\n";
    out << "output_dim " << model.config.output_dim << "\n";
    out << "window " << model.config.window << "\n";
    out << "learning_rate " << g17(model.config.learning_rate) << "\n";
    out << "grad_clip " << g17(model.config.grad_clip) << "\n";
    out << "epochs " << model.config.epochs << "\n";
    out << "seed " << model.config.seed << "\n";
    out << "aggregate_affect " << (model.config.aggregate_affect ? 1 : 0) << "\n";
    auto write_vec = [&](const Eigen::VectorXd& v2) {
        for (int j = 0; j < v2.size(); ++j) out << (j ? " " : "") << g17(v2[j]);
        out << "\n";
    };
    write_vec(model.standardizer.mean);
    write_vec(model.standardizer.std_dev);
    const Eigen::VectorXd flat = model.pack();
    out << "params " << flat.size() << "\n";
    for (Eigen::Index i = 0; i < flat.size(); ++i) out << g17(flat[i]) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

CLstmModel load_clstm(const std::string& path) {
    auto in = open_input(path);
    TokenReader tr(in, path);
    tr.expect("CLSTM");
    tr.expect("v1");
    CLstmConfig cfg;
    tr.expect("input_dim");
    cfg.input_dim = static_cast<int>(tr.next_int());
    tr.expect("hidden_dim");
    cfg.hidden_dim = static_cast<int>(tr.next_int());
    tr.expect("output_dim");
    cfg.output_dim = static_cast<int>(tr.next_int());
    tr.expect("window");
    cfg.window = static_cast<int>(tr.next_int());
    tr.expect("learning_rate");
    cfg.learning_rate = tr.next_double();
    tr.expect("grad_clip");
    cfg.grad_clip = tr.next_double();
    tr.expect("epochs");
    cfg.epochs = static_cast<int>(tr.next_int());
    tr.expect("seed");
    cfg.seed = static_cast<std::uint64_t>(tr.next_int());
    tr.expect("aggregate_affect");
    cfg.aggregate_affect = tr.next_int() != 0;

    CLstmModel model = CLstmModel::init(cfg);
    for (int j = 0; j < cfg.output_dim; ++j) model.standardizer.mean[j] = tr.next_double();
    for (int j = 0; j < cfg.output_dim; ++j) model.standardizer.std_dev[j] = tr.next_double();
    tr.expect("params");
    const long n = tr.next_int();
    if (n != model.n_params()) tr.fail("parameter count mismatch");
    Eigen::VectorXd flat(n);
    for (long i = 0; i < n; ++i) flat[i] = tr.next_double();
    model.unpack(flat);
    return model;
}

}  // namespace dyadgen
