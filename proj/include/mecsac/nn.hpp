#pragma once

// Dense networks with reverse-mode gradients, a tanh-squashed diagonal
// Gaussian head and first-order optimizers. Batches are column-major:
// a batch of N inputs of width d is a d x N matrix.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mecsac::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Tanh = 2 };

struct Layer {
    int in = 0;
    int out = 0;
    Activation activation = Activation::Identity;
    std::size_t offset = 0;  // W (out x in, row-major) then b (out) in the flat parameter vector
};

/// Intermediate values of one forward pass, needed by backward().
struct ForwardCache {
    std::vector<Matrix> inputs;       // input of each layer
    std::vector<Matrix> activations;  // output of each layer
};

class DenseNet {
public:
    DenseNet() = default;

    /// widths = {in, h1, ..., out}; hidden layers use `hidden`, the last uses `output`.
    DenseNet(const std::vector<int>& widths, Activation hidden,
             Activation output = Activation::Identity);

    /// Uniform(+-1/sqrt(fan_in)) weights and biases.
    void initialize(std::mt19937_64& rng);

    int input_width() const { return layers_.empty() ? 0 : layers_.front().in; }
    int output_width() const { return layers_.empty() ? 0 : layers_.back().out; }
    std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
    const std::vector<Layer>& layers() const { return layers_; }

    Vector& parameters() { return params_; }
    const Vector& parameters() const { return params_; }

    Matrix forward(const Matrix& input) const;
    Matrix forward(const Matrix& input, ForwardCache& cache) const;

    /// Accumulates dL/dparams into `grad` (resized and zeroed when empty) and
    /// returns dL/dinput.
    Matrix backward(const ForwardCache& cache, const Matrix& grad_output, Vector& grad) const;

    bool finite() const { return params_.allFinite(); }

private:
    void check_input(const Matrix& input) const;

    std::vector<Layer> layers_;
    Vector params_;
};

/// target <- xi * source + (1 - xi) * target
void polyak_update(DenseNet& target, const DenseNet& source, double xi);

// ---------------------------------------------------------------------------
// Squashed Gaussian head

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Output of a policy head evaluated on a batch. `head` rows are
/// [mean (d); log_std (d)].
struct SquashedSample {
    Matrix mean;
    Matrix log_std;       // clamped
    Matrix pre_tanh;      // u = mean + exp(log_std) * noise
    Matrix action;        // lo + (tanh(u) + 1)/2 * (hi - lo)
    RowVector log_prob;   // log density of `action`
};

/// Per-dimension output bounds; empty vectors mean [-1, 1].
struct SquashBounds {
    Vector lo;
    Vector hi;
};

SquashedSample sample_squashed_gaussian(const Matrix& head, const Matrix& noise,
                                        const SquashBounds& bounds = {});

/// Gradient of sum_n (g_a[:,n] . action[:,n] + g_lp[n] * log_prob[n]) with
/// respect to the head outputs, with the noise held fixed.
Matrix squashed_gaussian_backward(const SquashedSample& sample, const Matrix& noise,
                                  const Matrix& grad_action, const RowVector& grad_log_prob,
                                  const SquashBounds& bounds = {});

/// Log density of tanh(u) for u ~ N(mean, exp(log_std)^2), per dimension,
/// on [-1, 1].
double squashed_log_density(double mean, double log_std, double pre_tanh);

/// log(1 - tanh(u)^2) computed without cancellation.
double log_one_minus_tanh_sq(double u);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind : std::uint8_t { Adam = 0, Sgd = 1 };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerConfig config, std::size_t parameter_count);

    /// params -= step(grad)
    void step(Vector& params, const Vector& grad);

    const OptimizerConfig& config() const { return config_; }
    std::uint64_t steps() const { return t_; }

    void save(std::ostream& out) const;
    void load(std::istream& in);

private:
    OptimizerConfig config_;
    Vector m_;
    Vector v_;
    std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian layout:
//   8 bytes  magic "MECNN\0\0\0"
//   u32      format version (1)
//   u32      layer count L
//   L x { u32 in, u32 out, u8 activation }
//   u64      parameter count P
//   P x f64  parameters (per layer: W row-major, then b)
//   u8       has optimizer
//   [optimizer: u8 kind, f64 lr, beta1, beta2, epsilon, u64 t,
//               P x f64 first moment, P x f64 second moment]

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_network(std::ostream& out, const DenseNet& net, const Optimizer* optimizer = nullptr);
DenseNet load_network(std::istream& in, Optimizer* optimizer = nullptr);
void save_network(const std::string& path, const DenseNet& net, const Optimizer* optimizer = nullptr);
DenseNet load_network(const std::string& path, Optimizer* optimizer = nullptr);

}  // namespace mecsac::nn
