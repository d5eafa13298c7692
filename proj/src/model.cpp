// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/model.hpp"

#include <cmath>

#include "bmcogan/error.hpp"

namespace bmcogan {

Domain parse_domain(const std::string& s) {
    if (s == "seen") return Domain::seen;
    if (s == "unseen") return Domain::unseen;
    throw ArgumentError("unknown domain flag: " + s);
}

Ablation parse_ablation(const std::string& s) {
    if (s == "full") return Ablation::full;
    if (s == "wo_LG2") return Ablation::wo_LG2;
    if (s == "wo_Ld") return Ablation::wo_Ld;
    if (s == "wo_Lcls") return Ablation::wo_Lcls;
    if (s == "wo_Lcen") return Ablation::wo_Lcen;
    if (s == "shared_R") return Ablation::shared_R;
    if (s == "separate_Dsu") return Ablation::separate_Dsu;
    if (s == "coupled_Gsu") return Ablation::coupled_Gsu;
    if (s == "wo_D_test") return Ablation::wo_D_test;
    throw ArgumentError("unknown ablation variant: " + s);
}

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::wo_LG2: return "wo_LG2";
        case Ablation::wo_Ld: return "wo_Ld";
        case Ablation::wo_Lcls: return "wo_Lcls";
        case Ablation::wo_Lcen: return "wo_Lcen";
        case Ablation::shared_R: return "shared_R";
        case Ablation::separate_Dsu: return "separate_Dsu";
        case Ablation::coupled_Gsu: return "coupled_Gsu";
        case Ablation::wo_D_test: return "wo_D_test";
    }
    return "full";
}

std::vector<std::string> all_ablation_names() {
    return {"full",     "wo_LG2",   "wo_Ld",        "wo_Lcls",     "wo_Lcen",
            "shared_R", "separate_Dsu", "coupled_Gsu", "wo_D_test"};
}

Mat Linear::forward(const Mat& x) const {
    if (x.cols != in_dim())
        throw ShapeError("Linear: input width " + std::to_string(x.cols) + " != " +
                         std::to_string(in_dim()));
    Mat y = matmul_nt(x, W);
    add_rowvec(y, b);
    return y;
}

void Linear::backward(const Mat& x, const Mat& dy, Linear& g, Mat* dx) const {
    axpy(1.0, matmul_tn(dy, x), g.W);
    axpy(1.0, colsum(dy), g.b);
    if (dx) *dx = matmul(dy, W);
}

Mat leaky_relu(const Mat& pre) {
    Mat out = pre;
    for (double& v : out.d)
        if (v < 0) v *= kLeakySlope;
    return out;
}

Mat relu(const Mat& pre) {
    Mat out = pre;
    for (double& v : out.d)
        if (v < 0) v = 0;
    return out;
}

Mat leaky_relu_backward(const Mat& pre, const Mat& dpost) {
    check_same_shape(pre, dpost, "leaky_relu_backward");
    Mat d = dpost;
    for (size_t i = 0; i < d.size(); ++i)
        if (pre.d[i] <= 0) d.d[i] *= kLeakySlope;
    return d;
}

Mat relu_backward(const Mat& pre, const Mat& dpost) {
    check_same_shape(pre, dpost, "relu_backward");
    Mat d = dpost;
    for (size_t i = 0; i < d.size(); ++i)
        if (pre.d[i] <= 0) d.d[i] = 0;
    return d;
}

Generator::Fwd Generator::forward(const Mat& z, const Mat& a, Domain dom) const {
    if (z.rows != a.rows) throw ShapeError("Generator: z and a batch sizes differ");
    Fwd f;
    f.u = concat_cols(z, a);
    f.h_pre = hidden.forward(f.u);
    f.h = leaky_relu(f.h_pre);
    f.x_pre = out_for(dom).forward(f.h);
    f.x = relu(f.x_pre);
    return f;
}

void Generator::backward(const Fwd& f, const Mat& dx_out, Domain dom, Generator& g) const {
    const Mat dx_pre = relu_backward(f.x_pre, dx_out);
    Mat dh;
    out_for(dom).backward(f.h, dx_pre, g.out_for(dom), &dh);
    const Mat dh_pre = leaky_relu_backward(f.h_pre, dh);
    hidden.backward(f.u, dh_pre, g.hidden, nullptr);
}

Regressor::Fwd Regressor::forward(const Mat& x) const {
    Fwd f;
    f.h_pre = hidden.forward(x);
    f.h = leaky_relu(f.h_pre);
    f.a_hat = out.forward(f.h);
    return f;
}

void Regressor::backward(const Fwd& f, const Mat& x, const Mat& da_hat, Regressor& g,
                         Mat* dx) const {
    Mat dh;
    out.backward(f.h, da_hat, g.out, &dh);
    const Mat dh_pre = leaky_relu_backward(f.h_pre, dh);
    hidden.backward(x, dh_pre, g.hidden, dx);
}

CoupledDiscriminator::Fwd CoupledDiscriminator::forward(const Mat& a, Domain dom) const {
    Fwd f;
    f.h_pre = stem_for(dom).forward(a);
    f.h = leaky_relu(f.h_pre);
    f.logit = head_for(dom).forward(f.h);
    return f;
}

void CoupledDiscriminator::backward(const Fwd& f, const Mat& a, Domain dom, const Mat& dlogit,
                                    CoupledDiscriminator& g, Mat* da) const {
    Mat dh;
    head_for(dom).backward(f.h, dlogit, g.head_for(dom), &dh);
    const Mat dh_pre = leaky_relu_backward(f.h_pre, dh);
    stem_for(dom).backward(a, dh_pre, g.stem_for(dom), da);
}

Critic::Fwd Critic::forward(const Mat& x, const Mat& a) const {
    if (x.rows != a.rows) throw ShapeError("Critic: x and a batch sizes differ");
    Fwd f;
    f.u = concat_cols(x, a);
    f.k_pre = hidden.forward(f.u);
    f.k = leaky_relu(f.k_pre);
    f.score = out.forward(f.k);
    return f;
}

void Critic::backward(const Fwd& f, const Mat* dscore, const Mat* dk_extra, Critic& g,
                      Mat* du) const {
    Mat dk(f.k.rows, f.k.cols);
    if (dscore) out.backward(f.k, *dscore, g.out, &dk);
    if (dk_extra) {
        check_same_shape(dk, *dk_extra, "Critic::backward dk_extra");
        axpy(1.0, *dk_extra, dk);
    }
    const Mat dk_pre = leaky_relu_backward(f.k_pre, dk);
    hidden.backward(f.u, dk_pre, g.hidden, du);
}

void Critic::backward_early(const Fwd& f, const Mat& dk_extra, Critic& g, Mat* du) const {
    const Mat dk_pre = leaky_relu_backward(f.k_pre, dk_extra);
    hidden.backward(f.u, dk_pre, g.hidden, du);
}

Mat Critic::input_gradient(const Fwd& f) const {
    // score_i = w2 . leaky(W1 u_i + b1) + b2  =>  d score_i / d u_i =
    // W1^T (mask_i (.) w2). Rows are per-sample input gradients.
    const int n = f.u.rows;
    const int kh = hidden.out_dim();
    const int in = hidden.in_dim();
    Mat grads(n, in);
    for (int i = 0; i < n; ++i) {
        double* grow = grads.row(i);
        const double* kpre = f.k_pre.row(i);
        for (int h = 0; h < kh; ++h) {
            const double m = kpre[h] > 0 ? 1.0 : kLeakySlope;
            const double coef = out.W(0, h) * m;
            if (coef == 0.0) continue;
            const double* wrow = hidden.W.row(h);
            for (int j = 0; j < in; ++j) grow[j] += coef * wrow[j];
        }
    }
    return grads;
}

Mat Classifier::forward_logp(const Mat& x) const {
    Mat logits = lin.forward(x);
    for (int i = 0; i < logits.rows; ++i) {
        double* r = logits.row(i);
        double mx = r[0];
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, r[j]);
        double lse = 0;
        for (int j = 0; j < logits.cols; ++j) lse += std::exp(r[j] - mx);
        lse = mx + std::log(lse);
        for (int j = 0; j < logits.cols; ++j) r[j] -= lse;
    }
    return logits;
}

void Classifier::backward_logp(const Mat& x, const Mat& logp, const Mat& dlogp, Classifier& g,
                               Mat* dx) const {
    // d logits = d logp - softmax * rowsum(d logp)
    Mat dlogits = dlogp;
    for (int i = 0; i < dlogits.rows; ++i) {
        double rowsum = 0;
        for (int j = 0; j < dlogits.cols; ++j) rowsum += dlogp(i, j);
        for (int j = 0; j < dlogits.cols; ++j)
            dlogits(i, j) -= std::exp(logp(i, j)) * rowsum;
    }
    lin.backward(x, dlogits, g.lin, dx);
}

namespace {

void init_linear(Linear& l, int out, int in, Rng& rng) {
    l = Linear(out, in);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : l.W.d) v = sigma * rng.normal();
    // biases start at zero
}

}  // namespace

BMCoGANModel init_model(const ModelDims& dims_in, uint64_t seed, Ablation ablation) {
    ModelDims dims = dims_in;
    if (dims.dz <= 0) dims.dz = dims.a_dim;
    if (dims.dx <= 0 || dims.a_dim <= 0 || dims.c_seen <= 0 || dims.gen_hidden <= 0 ||
        dims.reg_hidden <= 0 || dims.disc_hidden <= 0 || dims.critic_hidden <= 0)
        throw ArgumentError("init_model: dimensions must be positive");

    BMCoGANModel m;
    m.dims = dims;
    m.ablation = ablation;
    Rng rng(seed, 3);

    init_linear(m.gen.hidden, dims.gen_hidden, dims.dz + dims.a_dim, rng);
    init_linear(m.gen.out, dims.dx, dims.gen_hidden, rng);
    if (ablation == Ablation::coupled_Gsu) {
        m.gen.split_output = true;
        init_linear(m.gen.out_u, dims.dx, dims.gen_hidden, rng);
    }

    init_linear(m.reg_s.hidden, dims.reg_hidden, dims.dx, rng);
    init_linear(m.reg_s.out, dims.a_dim, dims.reg_hidden, rng);
    if (ablation != Ablation::shared_R) {
        init_linear(m.reg_u.hidden, dims.reg_hidden, dims.dx, rng);
        init_linear(m.reg_u.out, dims.a_dim, dims.reg_hidden, rng);
    }

    init_linear(m.cdisc.stem_s, dims.disc_hidden, dims.a_dim, rng);
    init_linear(m.cdisc.stem_u, dims.disc_hidden, dims.a_dim, rng);
    init_linear(m.cdisc.head, 1, dims.disc_hidden, rng);
    if (ablation == Ablation::separate_Dsu) {
        m.cdisc.shared_head = false;
        init_linear(m.cdisc.head_u, 1, dims.disc_hidden, rng);
    }

    init_linear(m.critic.hidden, dims.critic_hidden, dims.dx + dims.a_dim, rng);
    init_linear(m.critic.out, 1, dims.critic_hidden, rng);

    init_linear(m.classifier.lin, dims.c_seen, dims.dx, rng);

    m.centers.centers = Mat(dims.c_seen, dims.critic_hidden);
    return m;
}

BMCoGANModel zeros_like(const BMCoGANModel& m) {
    BMCoGANModel z = m;
    auto params = model_params(z);
    for (auto& p : params) p.p->zero();
    return z;
}

std::vector<ParamRef> model_params(BMCoGANModel& m) {
    std::vector<ParamRef> v;
    auto add = [&v](const std::string& name, Linear& l) {
        v.push_back({name + ".W", &l.W});
        v.push_back({name + ".b", &l.b});
    };
    add("gen.hidden", m.gen.hidden);
    add("gen.out", m.gen.out);
    if (m.gen.split_output) add("gen.out_u", m.gen.out_u);
    add("reg_s.hidden", m.reg_s.hidden);
    add("reg_s.out", m.reg_s.out);
    if (!m.shared_regressor()) {
        add("reg_u.hidden", m.reg_u.hidden);
        add("reg_u.out", m.reg_u.out);
    }
    add("cdisc.stem_s", m.cdisc.stem_s);
    add("cdisc.stem_u", m.cdisc.stem_u);
    add("cdisc.head", m.cdisc.head);
    if (!m.cdisc.shared_head) add("cdisc.head_u", m.cdisc.head_u);
    add("critic.hidden", m.critic.hidden);
    add("critic.out", m.critic.out);
    add("classifier.lin", m.classifier.lin);
    v.push_back({"centers", &m.centers.centers});
    return v;
}

int64_t model_param_count(const BMCoGANModel& m) {
    auto& mm = const_cast<BMCoGANModel&>(m);
    int64_t n = 0;
    for (const auto& p : model_params(mm))
        if (p.name != "centers") n += static_cast<int64_t>(p.p->size());
    return n;
}

Mat generator_forward(const BMCoGANModel& m, const Mat& z, const Mat& a, Domain dom) {
    if (z.cols != m.dims.dz) throw ShapeError("generator_forward: z width != dz");
    if (a.cols != m.dims.a_dim) throw ShapeError("generator_forward: a width != a_dim");
    return m.gen.forward(z, a, dom).x;
}

Mat regressor_forward(const BMCoGANModel& m, const Mat& x, Domain dom) {
    if (x.cols != m.dims.dx) throw ShapeError("regressor_forward: x width != dx");
    return m.regressor(dom).forward(x).a_hat;
}

Mat coupled_discriminator_forward(const BMCoGANModel& m, const Mat& a, Domain dom) {
    if (a.cols != m.dims.a_dim)
        throw ShapeError("coupled_discriminator_forward: input width != a_dim");
    return m.cdisc.forward(a, dom).logit;
}

CriticOut critic_forward(const BMCoGANModel& m, const Mat& x, const Mat& a) {
    if (x.cols != m.dims.dx) throw ShapeError("critic_forward: x width != dx");
    if (a.cols != m.dims.a_dim) throw ShapeError("critic_forward: a width != a_dim");
    auto f = m.critic.forward(x, a);
    return CriticOut{std::move(f.score), std::move(f.k)};
}

Mat classifier_forward(const BMCoGANModel& m, const Mat& x) {
    if (x.cols != m.dims.dx) throw ShapeError("classifier_forward: x width != dx");
    return m.classifier.forward_logp(x);
}

}  // namespace bmcogan
