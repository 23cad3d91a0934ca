#include "mecsac/rollout.hpp"

namespace mecsac {

RolloutSummary rollout(Controller& controller, const SystemConfig& config,
                       const std::vector<int>& requests, double snr, const StepObserver& observer) {
    RolloutSummary summary;
    if (requests.size() < 2) return summary;
    controller.reset();
    SystemState state = SystemState::empty(config.num_tasks(), requests.front());
    double sum_b = 0.0, sum_e = 0.0, sum_w = 0.0, sum_r = 0.0;
    double discount = 1.0;
    for (std::size_t t = 0; t + 1 < requests.size(); ++t) {
        const SystemAction action = controller.act(state, snr);
        StepResult result = step(state, action, snr, requests[t + 1], config);
        if (observer) observer(TraceRecord{static_cast<long>(t), state, snr, action, result.cost});
        sum_b += result.cost.total_bandwidth;
        sum_e += result.cost.energy;
        sum_w += result.cost.weighted_cost;
        sum_r += result.cost.reward;
        summary.discounted_cost += discount * result.cost.weighted_cost;
        discount *= config.discount;
        state = std::move(result.next);
    }
    const double n = static_cast<double>(requests.size() - 1);
    summary.steps = requests.size() - 1;
    summary.mean_transmission = sum_b / n;
    summary.mean_computation = sum_e / n;
    summary.mean_weighted_cost = sum_w / n;
    summary.mean_reward = sum_r / n;
    return summary;
}

}  // namespace mecsac
