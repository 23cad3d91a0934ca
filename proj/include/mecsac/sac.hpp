#pragma once

// Soft actor-critic: replay buffer, twin soft Q-networks with Polyak targets,
// reparameterized tanh-Gaussian policy and learned entropy temperature, plus
// the environment training loop that routes policy outputs through the
// action codec.

#include "mecsac/codec.hpp"
#include "mecsac/nn.hpp"
#include "mecsac/rollout.hpp"
#include "mecsac/scenario.hpp"

#include <iosfwd>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecsac {

struct Batch {
    nn::Matrix states;       // S x N
    nn::Matrix actions;      // A x N
    nn::RowVector rewards;   // 1 x N
    nn::Matrix next_states;  // S x N
    std::vector<std::size_t> indices;

    std::size_t size() const { return static_cast<std::size_t>(rewards.size()); }
};

/// FIFO ring of (x, a, r, x') rows. Storage grows on demand up to capacity.
/// One writer and one sampling reader may use it concurrently.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

    void add(std::span<const double> state, std::span<const double> action, double reward,
             std::span<const double> next_state);

    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }
    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }

    /// Uniform without replacement within the batch (Floyd's algorithm).
    std::vector<std::size_t> sample_indices(std::size_t batch_size, std::mt19937_64& rng) const;
    Batch gather(const std::vector<std::size_t>& indices) const;
    Batch sample(std::size_t batch_size, std::mt19937_64& rng) const;

private:
    std::size_t stride() const { return static_cast<std::size_t>(2 * state_dim_ + action_dim_ + 1); }

    std::size_t capacity_;
    int state_dim_;
    int action_dim_;
    std::vector<double> data_;
    std::size_t size_ = 0;
    std::size_t head_ = 0;
    mutable std::mutex mutex_;
};

struct SacConfig {
    std::vector<int> hidden{256, 256};
    std::size_t batch_size = 256;
    double discount = 0.99;
    nn::OptimizerConfig critic_optimizer{nn::OptimizerKind::Adam, 1e-4};
    nn::OptimizerConfig actor_optimizer{nn::OptimizerKind::Adam, 1e-4};
    nn::OptimizerConfig alpha_optimizer{nn::OptimizerKind::Adam, 1e-4};
    double polyak = 0.005;
    int target_update_interval = 1;  // gradient steps between Polyak updates
    std::size_t buffer_capacity = 10'000'000;
    double initial_alpha = 1.0;
    bool learn_alpha = true;
    std::optional<double> target_entropy;  // default: -(action dimension)
    std::uint64_t seed = 1;
};

struct CriticLoss {
    double loss = 0.0;  // J(theta1) + J(theta2)
    double loss_q1 = 0.0;
    double loss_q2 = 0.0;
    nn::Vector grad_q1;
    nn::Vector grad_q2;
    nn::RowVector target;     // r + gamma * (min target Q - alpha log pi)
    nn::RowVector target_q1;  // target critic values at (x', a')
    nn::RowVector target_q2;
    nn::RowVector next_log_prob;
};

struct ActorLoss {
    double loss = 0.0;
    nn::Vector grad;
    nn::RowVector log_prob;
};

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double entropy = 0.0;  // -mean log pi
};

class SacAgent {
public:
    SacAgent(int state_dim, int action_dim, SacConfig config);

    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }
    const SacConfig& config() const { return config_; }

    /// Normalized action in [-1, 1]^A. Deterministic mode returns tanh(mean).
    std::vector<double> act(std::span<const double> state, bool deterministic, std::mt19937_64& rng) const;

    /// Soft Bellman residual with explicit next-action noise (A x N).
    CriticLoss critic_loss(const Batch& batch, const nn::Matrix& next_noise) const;
    /// Reparameterized policy objective with explicit noise (A x N).
    ActorLoss actor_loss(const Batch& batch, const nn::Matrix& noise) const;

    /// One gradient step on log alpha given policy log-probabilities; returns alpha.
    double temperature_update(const nn::RowVector& log_prob);
    void soft_target_update() { soft_target_update(config_.polyak); }
    void soft_target_update(double xi);

    /// Critic step, actor step, temperature step, then Polyak on cadence.
    UpdateStats update(const Batch& batch, std::mt19937_64& rng);

    double alpha() const;
    double log_alpha() const { return log_alpha_[0]; }
    void set_log_alpha(double value) { log_alpha_[0] = value; }
    double target_entropy() const { return target_entropy_; }
    std::uint64_t gradient_steps() const { return gradient_steps_; }

    nn::DenseNet& policy() { return policy_; }
    nn::DenseNet& q1() { return q1_; }
    nn::DenseNet& q2() { return q2_; }
    nn::DenseNet& q1_target() { return q1_target_; }
    nn::DenseNet& q2_target() { return q2_target_; }
    const nn::DenseNet& policy() const { return policy_; }
    const nn::DenseNet& q1() const { return q1_; }
    const nn::DenseNet& q2() const { return q2_; }
    const nn::DenseNet& q1_target() const { return q1_target_; }
    const nn::DenseNet& q2_target() const { return q2_target_; }

    void save(const std::string& directory) const;
    void load(const std::string& directory);

private:
    nn::Matrix critic_input(const nn::Matrix& states, const nn::Matrix& actions) const;

    int state_dim_;
    int action_dim_;
    SacConfig config_;
    double target_entropy_;

    nn::DenseNet policy_;
    nn::DenseNet q1_, q2_, q1_target_, q2_target_;
    nn::Optimizer policy_opt_, q1_opt_, q2_opt_, alpha_opt_;
    nn::Vector log_alpha_;
    std::uint64_t gradient_steps_ = 0;
};

// ---------------------------------------------------------------------------
// Environment loop

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainerConfig {
    int steps_per_epoch = 1000;
    int eval_interval = 10;  // training epochs between evaluations; 0 disables
    int eval_epochs = 10;
    std::size_t warmup_steps = 0;  // uniform random actions before the policy acts
    std::size_t update_after = 0;  // default: batch size
    int updates_per_step = 1;
    ActionMask mask;
    std::uint64_t seed = 1;
    std::string diagnostic_dir;  // checkpoint written here on divergence when set
};

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double snr = 1.0;
    double train_reward = 0.0;  // mean per-step reward over the epoch
    double eval_reward = 0.0;   // NaN when no evaluation ran
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double transmission = 0.0;  // mean B over the training epoch
    double computation = 0.0;   // mean E over the training epoch
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpochMetrics& m);
std::vector<EpochMetrics> read_metrics_csv(std::istream& in);

/// State dimension 2F+1; action dimension follows the mask.
int sac_state_dim(const SystemConfig& config);

/// Maps a normalized policy output through expand -> denormalize -> decode.
SystemAction decode_policy_output(std::span<const double> active, const SystemState& state,
                                  const SystemConfig& config, const ActionMask& mask, Normalizer& normalizer);

/// Lowest attainable reward for the given SNR floor.
double reward_lower_bound(const SystemConfig& config, double min_snr);

class SacTrainer {
public:
    SacTrainer(Scenario scenario, SacConfig sac, TrainerConfig trainer);

    /// One training epoch, plus an evaluation block on the configured cadence.
    EpochMetrics run_epoch();
    std::vector<EpochMetrics> train(int epochs, std::ostream* metrics_csv = nullptr);

    /// Mean per-step reward of the deterministic policy over `epochs` epochs
    /// on the trainer's evaluation stream. Epoch e starts from an empty cache
    /// with task e mod F requested.
    double evaluate(int epochs);

    /// Deterministic policy decision.
    SystemAction policy_action(const SystemState& state);

    /// Observer of every training transition: (state, stored action, decoded action, reward).
    using TransitionObserver = std::function<void(const SystemState&, const std::vector<double>&,
                                                  const ContinuousAction&, const SystemAction&, double)>;
    void set_transition_observer(TransitionObserver observer) { observer_ = std::move(observer); }

    int epochs_done() const { return epoch_; }
    const Scenario& scenario() const { return scenario_; }
    Scenario& scenario() { return scenario_; }
    const SacAgent& agent() const { return agent_; }
    SacAgent& agent() { return agent_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const TrainerConfig& trainer_config() const { return trainer_; }
    Normalizer& normalizer() { return normalizer_; }

    /// Directory with the five networks, scenario.cfg and manifest.txt.
    void save_checkpoint(const std::string& directory) const;

private:
    std::vector<double> random_action();

    Scenario scenario_;
    TrainerConfig trainer_;
    SacAgent agent_;
    ReplayBuffer buffer_;
    Normalizer normalizer_;
    std::mt19937_64 env_rng_, policy_rng_, replay_rng_, update_rng_, eval_rng_;
    SystemState state_;
    SystemState eval_state_;
    std::size_t total_steps_ = 0;
    int epoch_ = 0;
    TransitionObserver observer_;
};

/// Deterministic controller backed by a trained agent.
class SacController : public Controller {
public:
    SacController(const SacAgent& agent, SystemConfig config, ActionMask mask, std::string label);
    std::string name() const override { return label_; }
    SystemAction act(const SystemState& state, double snr) override;

private:
    const SacAgent& agent_;
    SystemConfig config_;
    ActionMask mask_;
    Normalizer normalizer_;
    std::string label_;
    std::mt19937_64 unused_rng_{0};
};

struct LoadedPolicy {
    Scenario scenario;
    SacAgent agent;
    ActionMask mask;
    KeyValues manifest;
};

/// Reads a checkpoint directory written by SacTrainer::save_checkpoint.
LoadedPolicy load_policy(const std::string& directory);

}  // namespace mecsac
