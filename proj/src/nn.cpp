#include "mecsac/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mecsac::nn {

namespace {

using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void apply_activation(Activation act, Matrix& z) {
    switch (act) {
        case Activation::Identity: break;
        case Activation::Relu: z = z.cwiseMax(0.0); break;
        case Activation::Tanh: z = z.array().tanh().matrix(); break;
    }
}

// dL/dz given dL/da and a = act(z).
Matrix activation_backward(Activation act, const Matrix& a, const Matrix& grad) {
    switch (act) {
        case Activation::Identity: return grad;
        case Activation::Relu: return (a.array() > 0.0).select(grad, 0.0);
        case Activation::Tanh: return (grad.array() * (1.0 - a.array().square())).matrix();
    }
    return grad;
}

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

DenseNet::DenseNet(const std::vector<int>& widths, Activation hidden, Activation output) {
    if (widths.size() < 2) throw std::invalid_argument("DenseNet needs at least input and output widths");
    std::size_t offset = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        if (widths[i] <= 0 || widths[i + 1] <= 0) throw std::invalid_argument("layer widths must be positive");
        Layer layer;
        layer.in = widths[i];
        layer.out = widths[i + 1];
        layer.activation = (i + 2 == widths.size()) ? output : hidden;
        layer.offset = offset;
        offset += static_cast<std::size_t>(layer.in + 1) * layer.out;
        layers_.push_back(layer);
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

void DenseNet::initialize(std::mt19937_64& rng) {
    for (const Layer& layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const std::size_t n = static_cast<std::size_t>(layer.in + 1) * layer.out;
        for (std::size_t k = 0; k < n; ++k) params_[static_cast<Eigen::Index>(layer.offset + k)] = dist(rng);
    }
}

void DenseNet::check_input(const Matrix& input) const {
    if (layers_.empty()) throw std::logic_error("forward on an empty network");
    if (input.rows() != input_width()) {
        throw std::invalid_argument("input width " + std::to_string(input.rows()) +
                                    " does not match network input " + std::to_string(input_width()));
    }
}

Matrix DenseNet::forward(const Matrix& input) const {
    check_input(input);
    Matrix x = input;
    for (const Layer& layer : layers_) {
        ConstRowMajorMap w(params_.data() + layer.offset, layer.out, layer.in);
        Eigen::Map<const Vector> b(params_.data() + layer.offset + static_cast<std::size_t>(layer.in) * layer.out,
                                   layer.out);
        Matrix z = w * x;
        z.colwise() += b;
        apply_activation(layer.activation, z);
        x = std::move(z);
    }
    return x;
}

Matrix DenseNet::forward(const Matrix& input, ForwardCache& cache) const {
    check_input(input);
    cache.inputs.resize(layers_.size());
    cache.activations.resize(layers_.size());
    const Matrix* x = &input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        ConstRowMajorMap w(params_.data() + layer.offset, layer.out, layer.in);
        Eigen::Map<const Vector> b(params_.data() + layer.offset + static_cast<std::size_t>(layer.in) * layer.out,
                                   layer.out);
        cache.inputs[l] = *x;
        Matrix z = w * *x;
        z.colwise() += b;
        apply_activation(layer.activation, z);
        cache.activations[l] = std::move(z);
        x = &cache.activations[l];
    }
    return cache.activations.back();
}

Matrix DenseNet::backward(const ForwardCache& cache, const Matrix& grad_output, Vector& grad) const {
    if (cache.activations.size() != layers_.size()) throw std::logic_error("backward without a matching forward pass");
    if (grad.size() == 0) grad = Vector::Zero(params_.size());
    if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer has the wrong size");
    Matrix g = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const Matrix dz = activation_backward(layer.activation, cache.activations[l], g);
        RowMajorMap gw(grad.data() + layer.offset, layer.out, layer.in);
        Eigen::Map<Vector> gb(grad.data() + layer.offset + static_cast<std::size_t>(layer.in) * layer.out, layer.out);
        gw.noalias() += dz * cache.inputs[l].transpose();
        gb += dz.rowwise().sum();
        ConstRowMajorMap w(params_.data() + layer.offset, layer.out, layer.in);
        g = w.transpose() * dz;
    }
    return g;
}

void polyak_update(DenseNet& target, const DenseNet& source, double xi) {
    if (target.parameter_count() != source.parameter_count()) {
        throw std::invalid_argument("polyak_update: parameter count mismatch");
    }
    target.parameters() = xi * source.parameters() + (1.0 - xi) * target.parameters();
}

// ---------------------------------------------------------------------------

double log_one_minus_tanh_sq(double u) {
    return 2.0 * (std::log(2.0) - u - softplus(-2.0 * u));
}

double squashed_log_density(double mean, double log_std, double pre_tanh) {
    const double ls = std::clamp(log_std, kLogStdMin, kLogStdMax);
    const double z = (pre_tanh - mean) / std::exp(ls);
    return -0.5 * z * z - ls - kHalfLog2Pi - log_one_minus_tanh_sq(pre_tanh);
}

namespace {

Vector half_range(const SquashBounds& bounds, Eigen::Index d) {
    if (bounds.lo.size() == 0) return Vector::Ones(d);
    if (bounds.lo.size() != d || bounds.hi.size() != d) throw std::invalid_argument("squash bounds size mismatch");
    return 0.5 * (bounds.hi - bounds.lo);
}

}  // namespace

SquashedSample sample_squashed_gaussian(const Matrix& head, const Matrix& noise, const SquashBounds& bounds) {
    const Eigen::Index d = head.rows() / 2;
    if (head.rows() != 2 * d || noise.rows() != d || noise.cols() != head.cols()) {
        throw std::invalid_argument("squashed gaussian: head/noise shape mismatch");
    }
    const Vector half = half_range(bounds, d);
    SquashedSample s;
    s.mean = head.topRows(d);
    s.log_std = head.bottomRows(d).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    s.pre_tanh = (s.mean.array() + s.log_std.array().exp() * noise.array()).matrix();
    const Matrix t = s.pre_tanh.array().tanh().matrix();
    s.action = t.array().colwise() * half.array();
    if (bounds.lo.size() != 0) s.action.colwise() += 0.5 * (bounds.hi + bounds.lo);

    const double log_scale = half.array().log().sum();
    s.log_prob.resize(head.cols());
    for (Eigen::Index n = 0; n < head.cols(); ++n) {
        double lp = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double e = noise(i, n);
            lp += -0.5 * e * e - s.log_std(i, n) - kHalfLog2Pi - log_one_minus_tanh_sq(s.pre_tanh(i, n));
        }
        s.log_prob[n] = lp - log_scale;
    }
    return s;
}

Matrix squashed_gaussian_backward(const SquashedSample& sample, const Matrix& noise, const Matrix& grad_action,
                                  const RowVector& grad_log_prob, const SquashBounds& bounds) {
    const Eigen::Index d = sample.mean.rows();
    const Eigen::Index n = sample.mean.cols();
    const Vector half = half_range(bounds, d);
    Matrix grad(2 * d, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index i = 0; i < d; ++i) {
            const double u = sample.pre_tanh(i, c);
            const double t = std::tanh(u);
            const double gu = grad_action(i, c) * half[i] * (1.0 - t * t) + grad_log_prob[c] * 2.0 * t;
            grad(i, c) = gu;
            const double ls = sample.log_std(i, c);
            const bool active = ls > kLogStdMin && ls < kLogStdMax;
            grad(d + i, c) = active ? gu * std::exp(ls) * noise(i, c) - grad_log_prob[c] : 0.0;
        }
    }
    return grad;
}

// ---------------------------------------------------------------------------

Optimizer::Optimizer(OptimizerConfig config, std::size_t parameter_count) : config_(config) {
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    m_ = Vector::Zero(static_cast<Eigen::Index>(parameter_count));
    v_ = Vector::Zero(static_cast<Eigen::Index>(parameter_count));
}

void Optimizer::step(Vector& params, const Vector& grad) {
    if (grad.size() != params.size()) throw std::invalid_argument("optimizer: gradient size mismatch");
    ++t_;
    if (config_.kind == OptimizerKind::Sgd) {
        params.noalias() -= config_.learning_rate * grad;
        return;
    }
    if (m_.size() != params.size()) throw std::invalid_argument("optimizer: state size mismatch");
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    m_ = b1 * m_ + (1.0 - b1) * grad;
    v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    params.array() -= config_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
}

// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'E', 'C', 'N', 'N', '\0', '\0', '\0'};

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint truncated");
    return value;
}

void put_vector(std::ostream& out, const Vector& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vector get_vector(std::istream& in, std::size_t n) {
    Vector v(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated");
    return v;
}

}  // namespace

void Optimizer::save(std::ostream& out) const {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(config_.kind));
    put(out, config_.learning_rate);
    put(out, config_.beta1);
    put(out, config_.beta2);
    put(out, config_.epsilon);
    put<std::uint64_t>(out, t_);
    put_vector(out, m_);
    put_vector(out, v_);
}

void Optimizer::load(std::istream& in) {
    const std::size_t n = static_cast<std::size_t>(m_.size());
    config_.kind = static_cast<OptimizerKind>(get<std::uint8_t>(in));
    config_.learning_rate = get<double>(in);
    config_.beta1 = get<double>(in);
    config_.beta2 = get<double>(in);
    config_.epsilon = get<double>(in);
    t_ = get<std::uint64_t>(in);
    m_ = get_vector(in, n);
    v_ = get_vector(in, n);
}

void save_network(std::ostream& out, const DenseNet& net, const Optimizer* optimizer) {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const Layer& layer : net.layers()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.in));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.out));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
    }
    put<std::uint64_t>(out, net.parameter_count());
    put_vector(out, net.parameters());
    put<std::uint8_t>(out, optimizer ? 1 : 0);
    if (optimizer) optimizer->save(out);
    if (!out) throw std::runtime_error("failed to write network checkpoint");
}

DenseNet load_network(std::istream& in, Optimizer* optimizer) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a network checkpoint");
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = get<std::uint32_t>(in);
    if (count == 0 || count > 1024) throw std::runtime_error("corrupt checkpoint layer count");
    std::vector<int> widths;
    std::vector<Activation> acts;
    for (std::uint32_t l = 0; l < count; ++l) {
        const auto lin = get<std::uint32_t>(in);
        const auto lout = get<std::uint32_t>(in);
        const auto act = get<std::uint8_t>(in);
        if (act > 2) throw std::runtime_error("corrupt checkpoint activation");
        if (l == 0) widths.push_back(static_cast<int>(lin));
        else if (static_cast<int>(lin) != widths.back()) throw std::runtime_error("checkpoint layer widths do not chain");
        widths.push_back(static_cast<int>(lout));
        acts.push_back(static_cast<Activation>(act));
    }
    DenseNet net(widths, acts.size() > 1 ? acts.front() : Activation::Identity, acts.back());
    for (std::size_t l = 0; l + 1 < acts.size(); ++l) {
        if (acts[l] != acts.front()) throw std::runtime_error("mixed hidden activations are not supported");
    }
    const auto p = get<std::uint64_t>(in);
    if (p != net.parameter_count()) throw std::runtime_error("checkpoint parameter count mismatch");
    net.parameters() = get_vector(in, p);
    const auto has_opt = get<std::uint8_t>(in);
    if (has_opt && optimizer) {
        Optimizer loaded(OptimizerConfig{}, p);
        loaded.load(in);
        *optimizer = loaded;
    }
    return net;
}

void save_network(const std::string& path, const DenseNet& net, const Optimizer* optimizer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_network(out, net, optimizer);
}

DenseNet load_network(const std::string& path, Optimizer* optimizer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_network(in, optimizer);
}

}  // namespace mecsac::nn
