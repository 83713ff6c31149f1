#include "vecplan/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <ostream>

namespace vecplan {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeMismatch(what);
}

void axpy(double* y, double a, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

double dot(const double* x, const double* y, size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += x[k] * y[k];
        s1 += x[k + 1] * y[k + 1];
        s2 += x[k + 2] * y[k + 2];
        s3 += x[k + 3] * y[k + 3];
    }
    for (; k < n; ++k) s0 += x[k] * y[k];
    return (s0 + s1) + (s2 + s3);
}

void matmul_nt(Mat& out, const Mat& a, const Mat& b) {
    require(a.cols == b.cols, "matmul_nt: inner dimensions disagree");
    out.rows = a.rows;
    out.cols = b.rows;
    out.data.resize(out.rows * out.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (size_t j = 0; j < b.rows; ++j) oi[j] = dot(ai, b.row(j), a.cols);
    }
}

void matmul_nn(Mat& out, const Mat& a, const Mat& b) {
    require(a.cols == b.rows, "matmul_nn: inner dimensions disagree");
    out.rows = a.rows;
    out.cols = b.cols;
    out.data.assign(out.rows * out.cols, 0.0);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (size_t k = 0; k < a.cols; ++k) axpy(oi, ai[k], b.row(k), b.cols);
    }
}

void accum_outer(Mat& dw, const Mat& dy, const Mat& x) {
    require(dy.rows == x.rows, "accum_outer: batch sizes disagree");
    require(dw.rows == dy.cols && dw.cols == x.cols, "accum_outer: output shape disagrees");
    for (size_t b = 0; b < dy.rows; ++b) {
        const double* dyb = dy.row(b);
        const double* xb = x.row(b);
        for (size_t j = 0; j < dy.cols; ++j) axpy(dw.row(j), dyb[j], xb, x.cols);
    }
}

double bce_term(double prob, double target) {
    const double p = std::min(1.0 - 1e-7, std::max(1e-7, prob));
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double bce_logit_term(double logit, double target) {
    return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

BceResult bce_loss(const Vec& probs, const Vec& targets, const std::vector<uint8_t>& mask) {
    require(probs.size() == targets.size() && probs.size() == mask.size(),
            "bce_loss: vector lengths disagree");
    BceResult r;
    r.grad.assign(probs.size(), 0.0);
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!mask[i]) continue;
        ++r.count;
        r.loss += bce_term(probs[i], targets[i]);
    }
    const double denom = static_cast<double>(std::max<size_t>(1, r.count));
    r.loss /= denom;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!mask[i]) continue;
        const double p = std::min(1.0 - 1e-7, std::max(1e-7, probs[i]));
        // derivative of the clamped term; flat outside the clamp window
        if (probs[i] > 1e-7 && probs[i] < 1.0 - 1e-7)
            r.grad[i] = (p - targets[i]) / (p * (1.0 - p)) / denom;
    }
    return r;
}

LogitBceSums bce_with_logits(const Vec& logits, const Vec& targets,
                             const std::vector<uint8_t>& mask) {
    require(logits.size() == targets.size() && logits.size() == mask.size(),
            "bce_with_logits: vector lengths disagree");
    LogitBceSums r;
    r.grad_sum.assign(logits.size(), 0.0);
    for (size_t i = 0; i < logits.size(); ++i) {
        if (!mask[i]) continue;
        ++r.count;
        r.loss_sum += bce_logit_term(logits[i], targets[i]);
        r.grad_sum[i] = sigmoid(logits[i]) - targets[i];
    }
    return r;
}

void layernorm_forward(const Mat& x, const LayerNormParams& p, Mat& y, Mat& xhat, Vec& istd) {
    require(p.gain.size() == x.cols && p.shift.size() == x.cols,
            "layernorm_forward: parameter width disagrees");
    const size_t H = x.cols;
    y.rows = xhat.rows = x.rows;
    y.cols = xhat.cols = H;
    y.data.resize(x.rows * H);
    xhat.data.resize(x.rows * H);
    istd.resize(x.rows);
    for (size_t b = 0; b < x.rows; ++b) {
        const double* xb = x.row(b);
        double mu = 0.0;
        for (size_t i = 0; i < H; ++i) mu += xb[i];
        mu /= static_cast<double>(H);
        double var = 0.0;
        for (size_t i = 0; i < H; ++i) var += (xb[i] - mu) * (xb[i] - mu);
        var /= static_cast<double>(H);
        const double is = 1.0 / std::sqrt(var + p.epsilon);
        istd[b] = is;
        double* xh = xhat.row(b);
        double* yb = y.row(b);
        for (size_t i = 0; i < H; ++i) {
            xh[i] = (xb[i] - mu) * is;
            yb[i] = p.gain[i] * xh[i] + p.shift[i];
        }
    }
}

void layernorm_backward(const Mat& dy, const Mat& xhat, const Vec& istd, const LayerNormParams& p,
                        Mat& dx, Vec& dgain, Vec& dshift) {
    const size_t H = dy.cols;
    require(xhat.rows == dy.rows && xhat.cols == H && istd.size() == dy.rows,
            "layernorm_backward: cache shape disagrees");
    require(dgain.size() == H && dshift.size() == H, "layernorm_backward: gradient width disagrees");
    dx.rows = dy.rows;
    dx.cols = H;
    dx.data.resize(dy.rows * H);
    for (size_t b = 0; b < dy.rows; ++b) {
        const double* dyb = dy.row(b);
        const double* xh = xhat.row(b);
        double* dxb = dx.row(b);
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (size_t i = 0; i < H; ++i) {
            const double dxhat = dyb[i] * p.gain[i];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xh[i];
            dgain[i] += dyb[i] * xh[i];
            dshift[i] += dyb[i];
        }
        mean_dxhat /= static_cast<double>(H);
        mean_dxhat_xhat /= static_cast<double>(H);
        for (size_t i = 0; i < H; ++i) {
            const double dxhat = dyb[i] * p.gain[i];
            dxb[i] = istd[b] * (dxhat - mean_dxhat - xh[i] * mean_dxhat_xhat);
        }
    }
}

void init_uniform(Mat& m, double bound, Rng& rng) {
    for (double& v : m.data) v = rng.uniform(-bound, bound);
}

void init_uniform(Vec& v, double bound, Rng& rng) {
    for (double& x : v) x = rng.uniform(-bound, bound);
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    size_t in = spec_.in_dim;
    for (size_t h : spec_.hidden) {
        DenseParams d;
        d.weight = Mat(h, in);
        d.bias.assign(h, 0.0);
        layers_.push_back(std::move(d));
        if (spec_.layernorm) {
            LayerNormParams n;
            n.gain.assign(h, 1.0);
            n.shift.assign(h, 0.0);
            norms_.push_back(std::move(n));
        }
        in = h;
    }
    DenseParams head;
    head.weight = Mat(spec_.out_dim, in);
    head.bias.assign(spec_.out_dim, 0.0);
    layers_.push_back(std::move(head));
}

void Mlp::init(double bound, Rng& rng) {
    for (DenseParams& d : layers_) {
        init_uniform(d.weight, bound, rng);
        init_uniform(d.bias, bound, rng);
    }
    for (LayerNormParams& n : norms_) {
        std::fill(n.gain.begin(), n.gain.end(), 1.0);
        std::fill(n.shift.begin(), n.shift.end(), 0.0);
    }
}

Mat Mlp::forward(const Mat& x, Cache& cache) const {
    require(x.cols == spec_.in_dim, "mlp forward: input width disagrees");
    cache.x = x;
    cache.xhat.assign(spec_.hidden.size(), Mat());
    cache.istd.assign(spec_.hidden.size(), Vec());
    cache.relu_in.assign(spec_.hidden.size(), Mat());
    cache.h.assign(spec_.hidden.size(), Mat());
    const Mat* cur = &cache.x;
    Mat pre;
    for (size_t l = 0; l < spec_.hidden.size(); ++l) {
        const DenseParams& d = layers_[l];
        matmul_nt(pre, *cur, d.weight);
        for (size_t b = 0; b < pre.rows; ++b) {
            double* r = pre.row(b);
            for (size_t j = 0; j < pre.cols; ++j) r[j] += d.bias[j];
        }
        Mat& ri = cache.relu_in[l];
        if (spec_.layernorm) {
            layernorm_forward(pre, norms_[l], ri, cache.xhat[l], cache.istd[l]);
        } else {
            ri = pre;
        }
        Mat& h = cache.h[l];
        h = ri;
        for (double& v : h.data) v = std::max(0.0, v);
        cur = &h;
    }
    const DenseParams& head = layers_.back();
    matmul_nt(cache.z, *cur, head.weight);
    for (size_t b = 0; b < cache.z.rows; ++b) {
        double* r = cache.z.row(b);
        for (size_t j = 0; j < cache.z.cols; ++j) r[j] += head.bias[j];
    }
    cache.y = cache.z;
    if (spec_.head == Head::Sigmoid)
        for (double& v : cache.y.data) v = sigmoid(v);
    return cache.y;
}

Mat Mlp::forward(const Mat& x) const {
    Cache cache;
    return forward(x, cache);
}

Vec Mlp::forward(const Vec& x) const {
    Mat m(1, x.size());
    m.data = x;
    return forward(m).data;
}

Mat Mlp::backward_from_preact(const Cache& cache, const Mat& dz, Mlp& grads) const {
    require(dz.rows == cache.z.rows && dz.cols == cache.z.cols,
            "mlp backward: gradient shape disagrees");
    require(grads.spec_ == spec_, "mlp backward: gradient container spec disagrees");
    const size_t L = spec_.hidden.size();
    const Mat& head_in = L > 0 ? cache.h[L - 1] : cache.x;

    DenseParams& ghead = grads.layers_.back();
    accum_outer(ghead.weight, dz, head_in);
    for (size_t b = 0; b < dz.rows; ++b) {
        const double* r = dz.row(b);
        for (size_t j = 0; j < dz.cols; ++j) ghead.bias[j] += r[j];
    }
    Mat dcur;
    matmul_nn(dcur, dz, layers_.back().weight);

    for (size_t l = L; l-- > 0;) {
        // through the ReLU: pass where its input was positive
        Mat dpre = dcur;
        for (size_t i = 0; i < dpre.data.size(); ++i)
            if (cache.relu_in[l].data[i] <= 0.0) dpre.data[i] = 0.0;
        if (spec_.layernorm) {
            Mat dln;
            layernorm_backward(dpre, cache.xhat[l], cache.istd[l], norms_[l], dln,
                               grads.norms_[l].gain, grads.norms_[l].shift);
            dpre = std::move(dln);
        }
        const Mat& in = l > 0 ? cache.h[l - 1] : cache.x;
        DenseParams& g = grads.layers_[l];
        accum_outer(g.weight, dpre, in);
        for (size_t b = 0; b < dpre.rows; ++b) {
            const double* r = dpre.row(b);
            for (size_t j = 0; j < dpre.cols; ++j) g.bias[j] += r[j];
        }
        matmul_nn(dcur, dpre, layers_[l].weight);
    }
    return dcur;
}

Mat Mlp::backward(const Cache& cache, const Mat& dy, Mlp& grads) const {
    if (spec_.head == Head::Identity) return backward_from_preact(cache, dy, grads);
    Mat dz = dy;
    for (size_t i = 0; i < dz.data.size(); ++i) {
        const double y = cache.y.data[i];
        dz.data[i] *= y * (1.0 - y);
    }
    return backward_from_preact(cache, dz, grads);
}

void Mlp::zero() {
    for (DenseParams& d : layers_) {
        d.weight.zero();
        std::fill(d.bias.begin(), d.bias.end(), 0.0);
    }
    for (LayerNormParams& n : norms_) {
        std::fill(n.gain.begin(), n.gain.end(), 0.0);
        std::fill(n.shift.begin(), n.shift.end(), 0.0);
    }
}

size_t Mlp::param_count() const {
    size_t n = 0;
    for (const DenseParams& d : layers_) n += d.weight.data.size() + d.bias.size();
    for (const LayerNormParams& p : norms_) n += p.gain.size() + p.shift.size();
    return n;
}

std::vector<TensorRef> collect_params(Mlp& m, const std::string& prefix) {
    std::vector<TensorRef> refs;
    auto add = [&refs](const std::string& name, Vec& v) {
        refs.push_back({name, v.data(), v.size()});
    };
    const size_t hidden = m.spec().hidden.size();
    for (size_t l = 0; l < m.layers().size(); ++l) {
        const std::string base =
            l < hidden ? prefix + ".layer" + std::to_string(l) : prefix + ".head";
        add(base + ".weight", m.layers()[l].weight.data);
        add(base + ".bias", m.layers()[l].bias);
        if (l < m.norms().size()) {
            add(prefix + ".norm" + std::to_string(l) + ".gain", m.norms()[l].gain);
            add(prefix + ".norm" + std::to_string(l) + ".shift", m.norms()[l].shift);
        }
    }
    return refs;
}

size_t total_size(const std::vector<TensorRef>& refs) {
    size_t n = 0;
    for (const TensorRef& r : refs) n += r.size;
    return n;
}

Adam::Adam(size_t total, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(total, 0.0), v_(total, 0.0) {}

void Adam::step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads) {
    require(params.size() == grads.size(), "adam: registry lengths disagree");
    require(total_size(params) == m_.size() && total_size(grads) == m_.size(),
            "adam: parameter count disagrees with accumulators");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    size_t off = 0;
    for (size_t r = 0; r < params.size(); ++r) {
        require(params[r].size == grads[r].size, "adam: tensor sizes disagree");
        double* p = params[r].data;
        const double* g = grads[r].data;
        for (size_t i = 0; i < params[r].size; ++i, ++off) {
            m_[off] = b1_ * m_[off] + (1.0 - b1_) * g[i];
            v_[off] = b2_ * v_[off] + (1.0 - b2_) * g[i] * g[i];
            const double mhat = m_[off] / c1;
            const double vhat = v_[off] / c2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
    for (const auto& kv : meta)
        if (kv.first == key) return &kv.second;
    return nullptr;
}

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
    for (const Entry& e : tensors)
        if (e.name == name) return &e;
    return nullptr;
}

void Checkpoint::add(const std::string& name, std::vector<uint64_t> shape, Vec data) {
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    if (n != data.size()) throw CheckpointError("tensor '" + name + "': shape does not match data");
    tensors.push_back({name, std::move(shape), std::move(data)});
}

namespace {

constexpr char kMagic[4] = {'V', 'P', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.write(b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.write(b, 8);
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& in) {
    char b[4];
    in.read(b, 4);
    if (!in) throw CheckpointError("truncated checkpoint");
    uint32_t v;
    std::memcpy(&v, b, 4);
    return v;
}

uint64_t get_u64(std::istream& in) {
    char b[8];
    in.read(b, 8);
    if (!in) throw CheckpointError("truncated checkpoint");
    uint64_t v;
    std::memcpy(&v, b, 8);
    return v;
}

std::string get_str(std::istream& in) {
    const uint32_t n = get_u32(in);
    if (n > (1u << 20)) throw CheckpointError("unreasonable string length");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw CheckpointError("truncated checkpoint");
    return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(ck.meta.size()));
    for (const auto& kv : ck.meta) {
        put_str(out, kv.first);
        put_str(out, kv.second);
    }
    put_u32(out, static_cast<uint32_t>(ck.tensors.size()));
    for (const Checkpoint::Entry& e : ck.tensors) {
        put_str(out, e.name);
        put_u32(out, static_cast<uint32_t>(e.shape.size()));
        for (uint64_t d : e.shape) put_u64(out, d);
        for (double v : e.data) {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(out, bits);
        }
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("not a model checkpoint (bad magic)");
    const uint32_t version = get_u32(in);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    const uint32_t nmeta = get_u32(in);
    for (uint32_t i = 0; i < nmeta; ++i) {
        std::string k = get_str(in);
        std::string v = get_str(in);
        ck.meta.emplace_back(std::move(k), std::move(v));
    }
    const uint32_t nt = get_u32(in);
    for (uint32_t i = 0; i < nt; ++i) {
        Checkpoint::Entry e;
        e.name = get_str(in);
        const uint32_t nd = get_u32(in);
        uint64_t count = 1;
        for (uint32_t d = 0; d < nd; ++d) {
            e.shape.push_back(get_u64(in));
            count *= e.shape.back();
        }
        if (count > (1ull << 32)) throw CheckpointError("unreasonable tensor size");
        e.data.resize(count);
        for (uint64_t j = 0; j < count; ++j) {
            const uint64_t bits = get_u64(in);
            std::memcpy(&e.data[j], &bits, 8);
        }
        ck.tensors.push_back(std::move(e));
    }
    return ck;
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
    write_checkpoint(out, ck);
    out.flush();
    if (!out) throw CheckpointError("write to '" + path + "' failed");
}

Checkpoint read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path + "'");
    return read_checkpoint(in);
}

void add_mlp(Checkpoint& ck, const Mlp& m, const std::string& prefix) {
    std::vector<TensorRef> refs = collect_params(const_cast<Mlp&>(m), prefix);
    for (const TensorRef& r : refs) ck.add(r.name, {r.size}, Vec(r.data, r.data + r.size));
}

void load_mlp(const Checkpoint& ck, Mlp& m, const std::string& prefix) {
    std::vector<TensorRef> refs = collect_params(m, prefix);
    for (TensorRef& r : refs) {
        const Checkpoint::Entry* e = ck.find(r.name);
        if (!e) throw CheckpointError("checkpoint is missing tensor '" + r.name + "'");
        if (e->data.size() != r.size)
            throw CheckpointError("tensor '" + r.name + "' has size " +
                                  std::to_string(e->data.size()) + ", expected " +
                                  std::to_string(r.size));
        std::copy(e->data.begin(), e->data.end(), r.data);
    }
}

}  // namespace vecplan
