#include "racket/labeling.hpp"

namespace racket {

std::optional<int> derive_app_label(const AppObservations& obs, const LabelRule& rule) {
    if (obs.advertised && obs.worker_devices >= rule.min_worker_devices &&
        obs.regular_devices == 0)
        return 1;
    if (obs.worker_devices == 0 && obs.regular_devices >= rule.min_regular_devices &&
        obs.play_reviews >= rule.min_play_reviews)
        return 0;
    return std::nullopt;
}

std::map<std::string, std::optional<int>> derive_app_labels(
    const std::map<std::string, AppObservations>& observations, const LabelRule& rule) {
    std::map<std::string, std::optional<int>> out;
    for (const auto& [app, obs] : observations) out[app] = derive_app_label(obs, rule);
    return out;
}

}  // namespace racket
