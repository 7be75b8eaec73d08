#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "probembed/evalkit.hpp"
#include "probembed/objective.hpp"
#include "probembed/synth.hpp"
#include "probembed/trainer.hpp"

namespace probembed {

// Full run configuration: one flat key = value namespace covering the
// dataset, trainer, loss, and evaluation settings. Unknown keys are
// rejected. The single `seed` key feeds every random stream.
struct RunConfig {
    std::uint64_t seed = 42;
    DatasetConfig data;
    TrainConfig train;
    LossConfig loss;
    std::vector<int> eval_ks = {1, 5, 10, 100};
    ConfidenceSource eval_confidence = ConfidenceSource::match_prob;
    std::size_t ece_bins = 10;
    std::vector<int> perturb_severities = {0, 1, 2, 3, 4, 5};

    // Copies the top-level seed into the sub-configs; call after parsing
    // and overrides are applied.
    void propagate_seed();
};

// Applies one `key` / `value` pair; throws std::invalid_argument for
// unknown keys or malformed values.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses a flat key = value file ('#' starts a comment).
RunConfig parse_config_file(const std::string& path);

// Parses config text from a string (same grammar as the file form).
RunConfig parse_config_text(const std::string& text);

// Canonical echo of the effective config; parse_config_text(render) is an
// identity.
std::string render_config(const RunConfig& cfg);

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& name);
const char* schedule_name(LrSchedule s);
LrSchedule schedule_from_name(const std::string& name);
const char* bce_mode_name(BceMode m);
BceMode bce_mode_from_name(const std::string& name);

}  // namespace probembed
