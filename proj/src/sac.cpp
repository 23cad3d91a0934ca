#include "mecsac/sac.hpp"

#include "mecsac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace mecsac {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    if (state_dim <= 0 || action_dim <= 0) throw std::invalid_argument("replay dimensions must be positive");
}

void ReplayBuffer::add(std::span<const double> state, std::span<const double> action, double reward,
                       std::span<const double> next_state) {
    if (static_cast<int>(state.size()) != state_dim_ || static_cast<int>(next_state.size()) != state_dim_ ||
        static_cast<int>(action.size()) != action_dim_) {
        throw std::invalid_argument("replay transition has the wrong shape");
    }
    std::lock_guard lock(mutex_);
    const std::size_t w = stride();
    if (size_ < capacity_ && data_.size() < (size_ + 1) * w) data_.resize((size_ + 1) * w);
    double* row = data_.data() + head_ * w;
    row = std::copy(state.begin(), state.end(), row);
    row = std::copy(action.begin(), action.end(), row);
    *row++ = reward;
    std::copy(next_state.begin(), next_state.end(), row);
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

std::size_t ReplayBuffer::size() const {
    std::lock_guard lock(mutex_);
    return size_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, std::mt19937_64& rng) const {
    const std::size_t n = size();
    if (batch_size == 0 || batch_size > n) {
        throw std::invalid_argument("cannot draw " + std::to_string(batch_size) + " distinct transitions from " +
                                    std::to_string(n));
    }
    std::vector<std::size_t> picked;
    picked.reserve(batch_size);
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = n - batch_size; j < n; ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        if (seen.insert(t).second) {
            picked.push_back(t);
        } else {
            seen.insert(j);
            picked.push_back(j);
        }
    }
    return picked;
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
    std::lock_guard lock(mutex_);
    const auto n = static_cast<Eigen::Index>(indices.size());
    Batch b;
    b.states.resize(state_dim_, n);
    b.actions.resize(action_dim_, n);
    b.rewards.resize(n);
    b.next_states.resize(state_dim_, n);
    b.indices = indices;
    const std::size_t w = stride();
    for (Eigen::Index c = 0; c < n; ++c) {
        if (indices[c] >= size_) throw std::out_of_range("replay index out of range");
        const double* row = data_.data() + indices[c] * w;
        for (int i = 0; i < state_dim_; ++i) b.states(i, c) = *row++;
        for (int i = 0; i < action_dim_; ++i) b.actions(i, c) = *row++;
        b.rewards[c] = *row++;
        for (int i = 0; i < state_dim_; ++i) b.next_states(i, c) = *row++;
    }
    return b;
}

Batch ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
    return gather(sample_indices(batch_size, rng));
}

// ---------------------------------------------------------------------------
// SacAgent

namespace {

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out);
    return w;
}

nn::Matrix gaussian_noise(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    nn::Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    return m;
}

}  // namespace

SacAgent::SacAgent(int state_dim, int action_dim, SacConfig config)
    : state_dim_(state_dim), action_dim_(action_dim), config_(std::move(config)) {
    if (state_dim <= 0 || action_dim <= 0) throw std::invalid_argument("agent dimensions must be positive");
    if (!(config_.discount >= 0.0 && config_.discount < 1.0)) throw std::invalid_argument("discount must be in [0,1)");
    if (!(config_.polyak >= 0.0 && config_.polyak <= 1.0)) throw std::invalid_argument("polyak weight must be in [0,1]");
    if (config_.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (!(config_.initial_alpha > 0.0)) throw std::invalid_argument("initial alpha must be positive");
    target_entropy_ = config_.target_entropy.value_or(-static_cast<double>(action_dim));

    std::mt19937_64 init(derive_seed(config_.seed, 100));
    policy_ = nn::DenseNet(widths(state_dim, config_.hidden, 2 * action_dim), nn::Activation::Relu);
    q1_ = nn::DenseNet(widths(state_dim + action_dim, config_.hidden, 1), nn::Activation::Relu);
    q2_ = q1_;
    policy_.initialize(init);
    q1_.initialize(init);
    q2_.initialize(init);
    q1_target_ = q1_;
    q2_target_ = q2_;

    policy_opt_ = nn::Optimizer(config_.actor_optimizer, policy_.parameter_count());
    q1_opt_ = nn::Optimizer(config_.critic_optimizer, q1_.parameter_count());
    q2_opt_ = nn::Optimizer(config_.critic_optimizer, q2_.parameter_count());
    alpha_opt_ = nn::Optimizer(config_.alpha_optimizer, 1);
    log_alpha_ = nn::Vector::Constant(1, std::log(config_.initial_alpha));
}

double SacAgent::alpha() const { return std::exp(log_alpha_[0]); }

nn::Matrix SacAgent::critic_input(const nn::Matrix& states, const nn::Matrix& actions) const {
    nn::Matrix in(state_dim_ + action_dim_, states.cols());
    in.topRows(state_dim_) = states;
    in.bottomRows(action_dim_) = actions;
    return in;
}

std::vector<double> SacAgent::act(std::span<const double> state, bool deterministic, std::mt19937_64& rng) const {
    if (static_cast<int>(state.size()) != state_dim_) throw std::invalid_argument("state has the wrong width");
    nn::Matrix x = Eigen::Map<const nn::Vector>(state.data(), state_dim_);
    const nn::Matrix head = policy_.forward(x);
    std::vector<double> out(action_dim_);
    if (deterministic) {
        for (int i = 0; i < action_dim_; ++i) out[i] = std::tanh(head(i, 0));
        return out;
    }
    const nn::SquashedSample s = nn::sample_squashed_gaussian(head, gaussian_noise(action_dim_, 1, rng));
    for (int i = 0; i < action_dim_; ++i) out[i] = s.action(i, 0);
    return out;
}

CriticLoss SacAgent::critic_loss(const Batch& batch, const nn::Matrix& next_noise) const {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) throw std::invalid_argument("critic_loss on an empty batch");
    CriticLoss out;
    const nn::SquashedSample next = nn::sample_squashed_gaussian(policy_.forward(batch.next_states), next_noise);
    const nn::Matrix next_in = critic_input(batch.next_states, next.action);
    out.target_q1 = q1_target_.forward(next_in);
    out.target_q2 = q2_target_.forward(next_in);
    out.next_log_prob = next.log_prob;
    const double a = alpha();
    out.target = batch.rewards.array() +
                 config_.discount * (out.target_q1.array().min(out.target_q2.array()) - a * next.log_prob.array());

    const nn::Matrix in = critic_input(batch.states, batch.actions);
    auto one = [&](const nn::DenseNet& q, nn::Vector& grad) {
        nn::ForwardCache cache;
        const nn::RowVector diff = q.forward(in, cache).row(0) - out.target;
        grad = nn::Vector::Zero(static_cast<Eigen::Index>(q.parameter_count()));
        q.backward(cache, diff / static_cast<double>(n), grad);
        return 0.5 * diff.squaredNorm() / static_cast<double>(n);
    };
    out.loss_q1 = one(q1_, out.grad_q1);
    out.loss_q2 = one(q2_, out.grad_q2);
    out.loss = out.loss_q1 + out.loss_q2;
    return out;
}

ActorLoss SacAgent::actor_loss(const Batch& batch, const nn::Matrix& noise) const {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) throw std::invalid_argument("actor_loss on an empty batch");
    const double a = alpha();
    nn::ForwardCache pcache;
    const nn::Matrix head = policy_.forward(batch.states, pcache);
    const nn::SquashedSample s = nn::sample_squashed_gaussian(head, noise);
    const nn::Matrix in = critic_input(batch.states, s.action);
    nn::ForwardCache c1, c2;
    const nn::RowVector v1 = q1_.forward(in, c1).row(0);
    const nn::RowVector v2 = q2_.forward(in, c2).row(0);

    ActorLoss out;
    out.log_prob = s.log_prob;
    nn::RowVector g1 = nn::RowVector::Zero(n), g2 = nn::RowVector::Zero(n);
    double total = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
        const bool first = v1[c] <= v2[c];
        total += a * s.log_prob[c] - (first ? v1[c] : v2[c]);
        (first ? g1 : g2)[c] = -1.0 / static_cast<double>(n);
    }
    out.loss = total / static_cast<double>(n);

    nn::Vector scratch1, scratch2;
    const nn::Matrix din = q1_.backward(c1, g1, scratch1) + q2_.backward(c2, g2, scratch2);
    const nn::Matrix grad_action = din.bottomRows(action_dim_);
    const nn::RowVector grad_lp = nn::RowVector::Constant(n, a / static_cast<double>(n));
    const nn::Matrix grad_head = nn::squashed_gaussian_backward(s, noise, grad_action, grad_lp);
    out.grad = nn::Vector::Zero(static_cast<Eigen::Index>(policy_.parameter_count()));
    policy_.backward(pcache, grad_head, out.grad);
    return out;
}

double SacAgent::temperature_update(const nn::RowVector& log_prob) {
    if (log_prob.size() == 0) return alpha();
    // d/d(log alpha) of -log_alpha * (log pi + target_entropy)
    nn::Vector grad(1);
    grad[0] = -(log_prob.array() + target_entropy_).mean();
    alpha_opt_.step(log_alpha_, grad);
    return alpha();
}

void SacAgent::soft_target_update(double xi) {
    nn::polyak_update(q1_target_, q1_, xi);
    nn::polyak_update(q2_target_, q2_, xi);
}

UpdateStats SacAgent::update(const Batch& batch, std::mt19937_64& rng) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    UpdateStats stats;

    const CriticLoss cl = critic_loss(batch, gaussian_noise(action_dim_, n, rng));
    q1_opt_.step(q1_.parameters(), cl.grad_q1);
    q2_opt_.step(q2_.parameters(), cl.grad_q2);

    const ActorLoss al = actor_loss(batch, gaussian_noise(action_dim_, n, rng));
    policy_opt_.step(policy_.parameters(), al.grad);

    if (config_.learn_alpha) temperature_update(al.log_prob);

    ++gradient_steps_;
    if (config_.target_update_interval > 0 && gradient_steps_ % config_.target_update_interval == 0) {
        soft_target_update();
    }
    stats.critic_loss = cl.loss;
    stats.actor_loss = al.loss;
    stats.alpha = alpha();
    stats.entropy = -al.log_prob.mean();
    return stats;
}

void SacAgent::save(const std::string& directory) const {
    fs::create_directories(directory);
    nn::save_network(directory + "/policy.bin", policy_, &policy_opt_);
    nn::save_network(directory + "/q1.bin", q1_, &q1_opt_);
    nn::save_network(directory + "/q2.bin", q2_, &q2_opt_);
    nn::save_network(directory + "/q1_target.bin", q1_target_);
    nn::save_network(directory + "/q2_target.bin", q2_target_);
    std::ofstream out(directory + "/temperature.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(log_alpha_.data()), sizeof(double));
    out.write(reinterpret_cast<const char*>(&gradient_steps_), sizeof(gradient_steps_));
    alpha_opt_.save(out);
    if (!out) throw std::runtime_error("failed to write " + directory + "/temperature.bin");
}

void SacAgent::load(const std::string& directory) {
    auto checked = [](const nn::DenseNet& loaded, const nn::DenseNet& expected, const std::string& what) {
        if (loaded.parameter_count() != expected.parameter_count() ||
            loaded.input_width() != expected.input_width() || loaded.output_width() != expected.output_width()) {
            throw std::runtime_error(what + ": network shape does not match the agent configuration");
        }
        return loaded;
    };
    policy_ = checked(nn::load_network(directory + "/policy.bin", &policy_opt_), policy_, "policy.bin");
    q1_ = checked(nn::load_network(directory + "/q1.bin", &q1_opt_), q1_, "q1.bin");
    q2_ = checked(nn::load_network(directory + "/q2.bin", &q2_opt_), q2_, "q2.bin");
    q1_target_ = checked(nn::load_network(directory + "/q1_target.bin"), q1_target_, "q1_target.bin");
    q2_target_ = checked(nn::load_network(directory + "/q2_target.bin"), q2_target_, "q2_target.bin");
    std::ifstream in(directory + "/temperature.bin", std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + directory + "/temperature.bin");
    in.read(reinterpret_cast<char*>(log_alpha_.data()), sizeof(double));
    in.read(reinterpret_cast<char*>(&gradient_steps_), sizeof(gradient_steps_));
    alpha_opt_.load(in);
}

// ---------------------------------------------------------------------------
// Metrics CSV

void write_metrics_header(std::ostream& out) {
    out << "epoch,snr,train_reward,eval_reward,critic_loss,actor_loss,alpha,transmission,computation\n";
}

void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
    out << m.epoch << ',' << format_double(m.snr) << ',' << format_double(m.train_reward) << ','
        << (std::isnan(m.eval_reward) ? std::string() : format_double(m.eval_reward)) << ','
        << format_double(m.critic_loss) << ',' << format_double(m.actor_loss) << ',' << format_double(m.alpha)
        << ',' << format_double(m.transmission) << ',' << format_double(m.computation) << '\n';
}

std::vector<EpochMetrics> read_metrics_csv(std::istream& in) {
    std::vector<EpochMetrics> rows;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("metrics file is empty");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 9) throw ConfigError("metrics line " + std::to_string(lineno) + ": expected 9 columns");
        auto num = [&](const std::string& s) {
            if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
            try {
                return std::stod(s);
            } catch (const std::exception&) {
                throw ConfigError("metrics line " + std::to_string(lineno) + ": bad number '" + s + "'");
            }
        };
        EpochMetrics m;
        m.epoch = static_cast<int>(num(f[0]));
        m.snr = num(f[1]);
        m.train_reward = num(f[2]);
        m.eval_reward = num(f[3]);
        m.critic_loss = num(f[4]);
        m.actor_loss = num(f[5]);
        m.alpha = num(f[6]);
        m.transmission = num(f[7]);
        m.computation = num(f[8]);
        rows.push_back(m);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Trainer

int sac_state_dim(const SystemConfig& config) { return 2 * config.num_tasks() + 1; }

SystemAction decode_policy_output(std::span<const double> active, const SystemState& state,
                                  const SystemConfig& config, const ActionMask& mask, Normalizer& normalizer) {
    const std::vector<double> full = expand_active_action(active, config.num_tasks(), mask);
    const ContinuousAction raw = normalizer.denormalize_action(full);
    return decode_action(state, raw, config, mask);
}

double reward_lower_bound(const SystemConfig& config, double min_snr) {
    double worst = 0.0;
    const double eff = std::log2(1.0 + min_snr);
    double max_push = 0.0;
    for (const Task& t : config.tasks) max_push = std::max(max_push, t.input_bits / (config.slot_length * eff));
    for (int f = 0; f < config.num_tasks(); ++f) {
        const Task& t = config.tasks[f];
        const int c_min = min_workable_cores(config, f, false);
        const double remaining = config.slot_length - t.input_bits * t.cycles_per_bit / (c_min * config.core_frequency);
        const double b = t.input_bits / (remaining * eff);
        const double m = config.num_cores;
        const double e = config.switched_capacitance * m * m * config.core_frequency * config.core_frequency *
                         t.input_bits * t.cycles_per_bit;
        worst = std::max(worst, b + max_push + config.cost_weight * e);
    }
    return -config.reward_scale * worst;
}

SacTrainer::SacTrainer(Scenario scenario, SacConfig sac, TrainerConfig trainer)
    : scenario_(std::move(scenario)),
      trainer_(std::move(trainer)),
      agent_(sac_state_dim(scenario_.config), active_action_dim(scenario_.config.num_tasks(), trainer_.mask), [&] {
          sac.discount = scenario_.config.discount;
          return sac;
      }()),
      buffer_(sac.buffer_capacity, sac_state_dim(scenario_.config),
              active_action_dim(scenario_.config.num_tasks(), trainer_.mask)),
      normalizer_(scenario_.config),
      env_rng_(derive_seed(trainer_.seed, 11)),
      policy_rng_(derive_seed(trainer_.seed, 12)),
      replay_rng_(derive_seed(trainer_.seed, 13)),
      update_rng_(derive_seed(trainer_.seed, 14)),
      eval_rng_(derive_seed(trainer_.seed, 15)) {
    scenario_.validate();
    if (trainer_.steps_per_epoch <= 0) throw ConfigError("steps_per_epoch must be positive");
    if (trainer_.updates_per_step < 0) throw ConfigError("updates_per_step must be non-negative");
    if (trainer_.update_after == 0) trainer_.update_after = agent_.config().batch_size;
    const int first = sample_index(stationary_distribution(scenario_.model), env_rng_);
    state_ = SystemState::empty(scenario_.config.num_tasks(), first);
}

std::vector<double> SacTrainer::random_action() {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> a(agent_.action_dim());
    for (double& x : a) x = u(policy_rng_);
    return a;
}

SystemAction SacTrainer::policy_action(const SystemState& state) {
    const std::vector<double> x = normalizer_.normalize_state(state);
    const std::vector<double> a = agent_.act(x, true, policy_rng_);
    return decode_policy_output(a, state, scenario_.config, trainer_.mask, normalizer_);
}

EpochMetrics SacTrainer::run_epoch() {
    const SystemConfig& config = scenario_.config;
    const double snr = scenario_.model.snr_at_epoch(epoch_);
    EpochMetrics m;
    m.snr = snr;
    double reward = 0.0, b_sum = 0.0, e_sum = 0.0, cl = 0.0, al = 0.0;
    std::size_t updates = 0;
    const std::size_t batch = agent_.config().batch_size;

    for (int s = 0; s < trainer_.steps_per_epoch; ++s) {
        const std::vector<double> x = normalizer_.normalize_state(state_);
        const std::vector<double> a =
            total_steps_ < trainer_.warmup_steps ? random_action() : agent_.act(x, false, policy_rng_);
        const std::vector<double> full = expand_active_action(a, config.num_tasks(), trainer_.mask);
        const ContinuousAction raw = normalizer_.denormalize_action(full);
        const SystemAction discrete = decode_action(state_, raw, config, trainer_.mask);
        const int next_request = sample_next_request(scenario_.model, state_.request, env_rng_);
        StepResult r = step(state_, discrete, snr, next_request, config);
        const std::vector<double> x2 = normalizer_.normalize_state(r.next);
        buffer_.add(x, a, r.cost.reward, x2);
        if (observer_) observer_(state_, a, raw, discrete, r.cost.reward);
        reward += r.cost.reward;
        b_sum += r.cost.total_bandwidth;
        e_sum += r.cost.energy;
        state_ = std::move(r.next);
        ++total_steps_;

        if (total_steps_ >= trainer_.update_after && buffer_.size() >= batch) {
            for (int k = 0; k < trainer_.updates_per_step; ++k) {
                const UpdateStats u = agent_.update(buffer_.sample(batch, replay_rng_), update_rng_);
                if (!std::isfinite(u.critic_loss) || !std::isfinite(u.actor_loss) || !agent_.policy().finite() ||
                    !agent_.q1().finite() || !agent_.q2().finite()) {
                    std::string where;
                    if (!trainer_.diagnostic_dir.empty()) {
                        save_checkpoint(trainer_.diagnostic_dir);
                        where = "; diagnostic checkpoint in " + trainer_.diagnostic_dir;
                    }
                    throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch_ + 1) + ", step " +
                                           std::to_string(total_steps_) + " (critic loss " +
                                           std::to_string(u.critic_loss) + ", actor loss " +
                                           std::to_string(u.actor_loss) + ")" + where);
                }
                cl += u.critic_loss;
                al += u.actor_loss;
                ++updates;
            }
        }
    }
    const double steps = trainer_.steps_per_epoch;
    ++epoch_;
    m.epoch = epoch_;
    m.train_reward = reward / steps;
    m.transmission = b_sum / steps;
    m.computation = e_sum / steps;
    m.critic_loss = updates ? cl / static_cast<double>(updates) : 0.0;
    m.actor_loss = updates ? al / static_cast<double>(updates) : 0.0;
    m.alpha = agent_.alpha();
    m.eval_reward = std::numeric_limits<double>::quiet_NaN();
    if (trainer_.eval_interval > 0 && epoch_ % trainer_.eval_interval == 0 && trainer_.eval_epochs > 0) {
        m.eval_reward = evaluate(trainer_.eval_epochs);
    }
    return m;
}

std::vector<EpochMetrics> SacTrainer::train(int epochs, std::ostream* metrics_csv) {
    std::vector<EpochMetrics> out;
    out.reserve(static_cast<std::size_t>(std::max(epochs, 0)));
    for (int e = 0; e < epochs; ++e) {
        out.push_back(run_epoch());
        if (metrics_csv) write_metrics_row(*metrics_csv, out.back());
    }
    return out;
}

double SacTrainer::evaluate(int epochs) {
    const SystemConfig& config = scenario_.config;
    const double snr = scenario_.model.snr_at_epoch(std::max(epoch_ - 1, 0));
    // The deterministic policy can settle into different cache contents
    // depending on the first requests, so every epoch restarts from an empty
    // cache and the first request cycles through the tasks.
    double reward = 0.0;
    long steps = 0;
    for (int e = 0; e < epochs; ++e) {
        eval_state_ = SystemState::empty(config.num_tasks(), e % config.num_tasks());
        for (int s = 0; s < trainer_.steps_per_epoch; ++s, ++steps) {
            const SystemAction a = policy_action(eval_state_);
            const int next_request = sample_next_request(scenario_.model, eval_state_.request, eval_rng_);
            StepResult r = step(eval_state_, a, snr, next_request, config);
            reward += r.cost.reward;
            eval_state_ = std::move(r.next);
        }
    }
    return steps > 0 ? reward / static_cast<double>(steps) : 0.0;
}

namespace {

std::string rng_text(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

void SacTrainer::save_checkpoint(const std::string& directory) const {
    fs::create_directories(directory);
    agent_.save(directory);
    save_scenario(directory + "/scenario.cfg", scenario_);
    KeyValues manifest;
    manifest["config_hash"] = hex64(config_hash(scenario_));
    manifest["epoch"] = std::to_string(epoch_);
    manifest["total_steps"] = std::to_string(total_steps_);
    manifest["alpha"] = format_double(agent_.alpha());
    manifest["log_alpha"] = format_double(agent_.log_alpha());
    manifest["state_dim"] = std::to_string(agent_.state_dim());
    manifest["action_dim"] = std::to_string(agent_.action_dim());
    manifest["hidden"] = join_ints(agent_.config().hidden);
    manifest["mask_push"] = trainer_.mask.push ? "1" : "0";
    manifest["mask_cache"] = trainer_.mask.cache ? "1" : "0";
    manifest["seed"] = std::to_string(trainer_.seed);
    manifest["rng_env"] = rng_text(env_rng_);
    manifest["rng_policy"] = rng_text(policy_rng_);
    manifest["rng_replay"] = rng_text(replay_rng_);
    manifest["rng_update"] = rng_text(update_rng_);
    manifest["rng_eval"] = rng_text(eval_rng_);
    std::ofstream out(directory + "/manifest.txt");
    write_key_values(out, manifest);
    if (!out) throw std::runtime_error("failed to write " + directory + "/manifest.txt");
}

LoadedPolicy load_policy(const std::string& directory) {
    const KeyValues manifest = read_key_values(directory + "/manifest.txt");
    Scenario scenario = load_scenario(directory + "/scenario.cfg");
    const std::string expected = get_string(manifest, "config_hash", "");
    const std::string actual = hex64(config_hash(scenario));
    if (expected != actual) {
        throw ConfigError("checkpoint scenario hash " + actual + " does not match manifest hash " + expected);
    }
    SacConfig cfg;
    cfg.hidden.clear();
    for (double w : parse_double_list(get_string(manifest, "hidden", ""), "hidden")) {
        cfg.hidden.push_back(static_cast<int>(w));
    }
    cfg.discount = scenario.config.discount;
    ActionMask mask;
    mask.push = get_int(manifest, "mask_push", 1) != 0;
    mask.cache = get_int(manifest, "mask_cache", 1) != 0;
    const int state_dim = static_cast<int>(get_int(manifest, "state_dim", 0));
    const int action_dim = static_cast<int>(get_int(manifest, "action_dim", 0));
    if (state_dim != sac_state_dim(scenario.config) ||
        action_dim != active_action_dim(scenario.config.num_tasks(), mask)) {
        throw ConfigError("checkpoint dimensions do not match its scenario");
    }
    SacAgent agent(state_dim, action_dim, cfg);
    agent.load(directory);
    return LoadedPolicy{std::move(scenario), std::move(agent), mask, manifest};
}

// ---------------------------------------------------------------------------

SacController::SacController(const SacAgent& agent, SystemConfig config, ActionMask mask, std::string label)
    : agent_(agent), config_(std::move(config)), mask_(mask), normalizer_(config_), label_(std::move(label)) {}

SystemAction SacController::act(const SystemState& state, double /*snr*/) {
    const std::vector<double> x = normalizer_.normalize_state(state);
    const std::vector<double> a = agent_.act(x, true, unused_rng_);
    return decode_policy_output(a, state, config_, mask_, normalizer_);
}

}  // namespace mecsac
