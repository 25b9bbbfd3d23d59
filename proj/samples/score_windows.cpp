// Score synthetic windows with the reference momentum model, then refit the
// logistic model on the same windows and compare a few coefficients.
//
//   ./score_windows [fixture.json]

#include <algorithm>
#include <cstdio>

#include "mxg/ingest.hpp"
#include "mxg/momentum.hpp"
#include "mxg/synth.hpp"

int main(int argc, char** argv) {
    using namespace mxg;
    const auto model = argc > 1 ? load_momentum_model(argv[1]) : reference_momentum_model();

    SynthConfig cfg;
    cfg.n_games = 20;
    const auto windows = build_windows(generate(cfg).events, {30, 30});

    std::vector<std::pair<double, const WindowFeatures*>> scored;
    for (const auto& w : windows) {
        scored.emplace_back(momentum_score(model, w), &w);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::printf("%zu windows; highest momentum:\n", windows.size());
    for (std::size_t i = 0; i < 5 && i < scored.size(); ++i) {
        std::printf("  %-22s  M = %.3f  goal = %d\n", scored[i].second->window_id.c_str(), scored[i].first, scored[i].second->goal_label);
    }

    const auto fitted = fit_logistic(windows);
    std::printf("refit on %zu windows (planted -> fitted):\n", windows.size());
    for (EventType e : {EventType::faceoff_success, EventType::penalty, EventType::lpr}) {
        std::printf("  %-16s %+.4f -> %+.4f\n", std::string(event_name(e)).c_str(), model.coefficient(e), fitted.coefficient(e));
    }
    return 0;
}
