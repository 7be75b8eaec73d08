#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace probembed {

// H x W image-like grid with values in [0, 1], row-major.
struct Grid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

    double& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
    std::vector<double> flattened() const { return values; }
};

// One synthetic study: two image-like views, two text-like feature
// sections, a latent class, and a flag recording whether the text was
// redrawn from a neighboring class.
struct SynthStudy {
    std::string id;
    Grid view1, view2;
    std::vector<double> sect1, sect2;
    int class_label = 0;
    double ambiguity = 0.0;  // 1.0 when the text came from a class mixture
};

struct DatasetConfig {
    std::size_t n = 2000;
    int classes = 10;
    double ambiguity = 0.3;
    std::size_t grid = 16;  // square views, grid x grid
    std::size_t text_dim = 32;
    std::size_t style_dim = 4;
    double style_img = 0.15;   // amplitude of the shared per-study style in views
    double style_txt = 0.60;   // amplitude of the shared per-study style in sections
    double view_noise = 0.06;  // per-pixel view noise std
    double text_noise = 0.15;  // per-entry section noise std
    std::uint64_t seed = 42;
};

// A generated dataset together with the class prototypes it was rendered
// from. The text prototypes double as class prompts for zero-shot
// evaluation.
struct SynthDataset {
    DatasetConfig config;
    std::vector<Grid> image_prototypes;               // one per class
    std::vector<std::vector<double>> text_prototypes;  // one per class
    std::vector<SynthStudy> studies;
};

// Deterministic many-to-many synthetic generator. Views and sections are
// noisy renderings of per-class prototypes plus a per-study style shared
// across all four inputs; with probability cfg.ambiguity a study's
// sections are rendered from the midpoint of its class prototype and an
// adjacent class on the class ring.
SynthDataset generate_dataset(const DatasetConfig& cfg);
SynthDataset generate_dataset(std::size_t n, int classes, double ambiguity, std::uint64_t seed);

struct MissingViewConfig {
    double noise_amp = 0.02;  // additive uniform noise amplitude
    int max_shift = 1;        // crop-and-pad shift range in pixels
};

// Fills view2 from view1 with additive uniform noise and a small random
// crop-and-pad shift (shifted content, zero padding at the vacated edge).
SynthStudy synthesize_missing_view(const SynthStudy& study, std::uint64_t seed,
                                   const MissingViewConfig& cfg = {});

enum class PerturbKind { blur, noise, brightness_contrast, rotation };

struct PerturbSpec {
    PerturbKind kind = PerturbKind::blur;
    int severity = 0;  // 0 = identity, 1..5 from the severity tables
    std::uint64_t seed = 0;
};

const char* perturb_kind_name(PerturbKind kind);
PerturbKind perturb_kind_from_name(const std::string& name);

// Severity tables (index severity-1): blur sigma, noise std, brightness/
// contrast magnitude, rotation degrees.
extern const double kBlurSigma[5];
extern const double kNoiseStd[5];
extern const double kBrightnessContrast[5];
extern const double kRotationDeg[5];

// Applies one corruption at the given severity; output clipped to [0, 1].
// Severity 0 returns the input unchanged.
Grid perturb_image(const Grid& img, const PerturbSpec& spec);

// Rotation about the grid center with bilinear resampling and zero
// padding. Quarter-turn multiples of square grids take an exact
// permutation path, so four 90-degree turns reproduce the input bit for
// bit.
Grid rotate_grid(const Grid& img, double degrees);

// Dataset container I/O: a self-describing binary file carrying the
// generating config, class prototypes, and all studies, plus a
// human-readable manifest next to it.
void write_dataset(const SynthDataset& dataset, const std::string& path);
SynthDataset read_dataset(const std::string& path);
void write_dataset_manifest(const SynthDataset& dataset, const std::string& path);

}  // namespace probembed
