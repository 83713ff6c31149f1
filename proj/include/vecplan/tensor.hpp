#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "vecplan/rng.hpp"

namespace vecplan {

using Vec = std::vector<double>;

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Row-major dense matrix. Rows double as batch members: a batch of B vectors
// of width n is a B x n matrix.
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }
    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }
    void zero() { data.assign(rows * cols, 0.0); }

    bool operator==(const Mat&) const = default;
};

// out = a * b^T with a: m x k, b: n x k, out resized to m x n. The inner dot
// uses a fixed four-accumulator association so results are reproducible.
void matmul_nt(Mat& out, const Mat& a, const Mat& b);
// out = a * b with a: m x k, b: k x n, out resized to m x n.
void matmul_nn(Mat& out, const Mat& a, const Mat& b);
// dw += dy^T * x with dy: B x out, x: B x in, dw: out x in. Batch members are
// accumulated in index order.
void accum_outer(Mat& dw, const Mat& dy, const Mat& x);

double dot(const double* x, const double* y, size_t n);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Cross-entropy of one probability against a {0,1} target, with the
// probability clamped to [1e-7, 1 - 1e-7] before the logs.
double bce_term(double prob, double target);
// Stable equivalent computed from the logit: max(z,0) - z*t + log(1+e^-|z|).
double bce_logit_term(double logit, double target);

struct BceResult {
    double loss = 0.0;  // masked mean
    Vec grad;           // d loss / d prob, zero on masked-out entries
    size_t count = 0;   // contributing entries
};

// Masked mean cross-entropy over probabilities; mask entries are 0 or 1.
BceResult bce_loss(const Vec& probs, const Vec& targets, const std::vector<uint8_t>& mask);

struct LogitBceSums {
    double loss_sum = 0.0;  // unnormalized sum of per-entry terms
    Vec grad_sum;           // d loss_sum / d logit = (sigmoid(z) - t) on masked entries
    size_t count = 0;
};

// Unnormalized masked cross-entropy from logits; callers divide by their own
// denominator (losses pooled across several calls share one normalizer).
LogitBceSums bce_with_logits(const Vec& logits, const Vec& targets,
                             const std::vector<uint8_t>& mask);

struct DenseParams {
    Mat weight;  // out x in
    Vec bias;    // out

    bool operator==(const DenseParams&) const = default;
};

struct LayerNormParams {
    Vec gain;
    Vec shift;
    double epsilon = 1e-5;

    bool operator==(const LayerNormParams&) const = default;
};

// Per row of x: xhat = (x - mean) / sqrt(var + eps), y = gain*xhat + shift.
// xhat and istd are cached for the backward pass.
void layernorm_forward(const Mat& x, const LayerNormParams& p, Mat& y, Mat& xhat, Vec& istd);
void layernorm_backward(const Mat& dy, const Mat& xhat, const Vec& istd, const LayerNormParams& p,
                        Mat& dx, Vec& dgain, Vec& dshift);

// Fills every entry with an independent draw from U[-bound, bound].
void init_uniform(Mat& m, double bound, Rng& rng);
void init_uniform(Vec& v, double bound, Rng& rng);

enum class Head { Identity, Sigmoid };

struct MlpSpec {
    size_t in_dim = 0;
    std::vector<size_t> hidden;
    size_t out_dim = 0;
    bool layernorm = true;  // after each hidden affine, before the ReLU
    Head head = Head::Identity;

    bool operator==(const MlpSpec&) const = default;
};

// Fully connected net: per hidden layer affine -> layer norm -> ReLU, then an
// affine head with an optional sigmoid. Doubles as its own gradient container
// (a zeroed twin of the same spec accumulates parameter gradients).
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(MlpSpec spec);

    // Affine weights and biases from U[-bound, bound]; norm gains 1, shifts 0.
    void init(double bound, Rng& rng);

    struct Cache {
        Mat x;                     // input batch
        std::vector<Mat> xhat;     // layer-norm internals per hidden layer
        std::vector<Vec> istd;
        std::vector<Mat> relu_in;  // value fed to the ReLU per hidden layer
        std::vector<Mat> h;        // post-ReLU output per hidden layer
        Mat z;                     // pre-head activations
        Mat y;                     // head output
    };

    // x: B x in_dim, result B x out_dim.
    Mat forward(const Mat& x, Cache& cache) const;
    Mat forward(const Mat& x) const;
    Vec forward(const Vec& x) const;

    // dz is the gradient at the pre-head activations (B x out_dim). Parameter
    // gradients accumulate into grads (same spec); the return value is dx.
    Mat backward_from_preact(const Cache& cache, const Mat& dz, Mlp& grads) const;
    // dy is the gradient at the head output; routed through the head
    // derivative, then backward_from_preact.
    Mat backward(const Cache& cache, const Mat& dy, Mlp& grads) const;

    const MlpSpec& spec() const { return spec_; }
    std::vector<DenseParams>& layers() { return layers_; }
    const std::vector<DenseParams>& layers() const { return layers_; }
    std::vector<LayerNormParams>& norms() { return norms_; }
    const std::vector<LayerNormParams>& norms() const { return norms_; }

    void zero();  // all parameters (gradient-container reset)
    size_t param_count() const;

    bool operator==(const Mlp&) const = default;

private:
    MlpSpec spec_;
    std::vector<DenseParams> layers_;  // hidden affines, then the head affine
    std::vector<LayerNormParams> norms_;
};

// Named view over one parameter tensor; the registries of a model and of its
// gradient twin list the same names in the same order.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    size_t size = 0;
};

std::vector<TensorRef> collect_params(Mlp& m, const std::string& prefix);
size_t total_size(const std::vector<TensorRef>& refs);

// Adam with bias correction: m = b1*m + (1-b1)*g, v = b2*v + (1-b2)*g^2,
// p -= lr * mhat / (sqrt(vhat) + eps).
class Adam {
public:
    Adam() = default;
    explicit Adam(size_t total, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    // Walks params and grads in registry order; total sizes must match the
    // accumulator length.
    void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads);

    uint64_t step_count() const { return t_; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    uint64_t t_ = 0;
    Vec m_, v_;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Versioned binary container of named tensors plus string metadata
// (little-endian, layout in docs/file-formats.md). Round-trips bit-exactly.
struct Checkpoint {
    struct Entry {
        std::string name;
        std::vector<uint64_t> shape;
        Vec data;

        bool operator==(const Entry&) const = default;
    };

    std::vector<std::pair<std::string, std::string>> meta;  // ordered
    std::vector<Entry> tensors;

    const std::string* find_meta(const std::string& key) const;
    const Entry* find(const std::string& name) const;
    void add(const std::string& name, std::vector<uint64_t> shape, Vec data);

    bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ck);
void write_checkpoint_file(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint_file(const std::string& path);

// Stores every tensor of m under prefix (names match collect_params), plus the
// spec so the loader can validate. Loading into a differently shaped net
// throws CheckpointError.
void add_mlp(Checkpoint& ck, const Mlp& m, const std::string& prefix);
void load_mlp(const Checkpoint& ck, Mlp& m, const std::string& prefix);

}  // namespace vecplan
