#include "probembed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

#include "binio.hpp"
#include "probembed/rng.hpp"
#include "textio.hpp"

namespace probembed {

const double kBlurSigma[5] = {0.5, 1.0, 1.5, 2.0, 3.0};
const double kNoiseStd[5] = {0.02, 0.05, 0.1, 0.2, 0.4};
const double kBrightnessContrast[5] = {0.05, 0.10, 0.20, 0.35, 0.50};
const double kRotationDeg[5] = {5.0, 10.0, 15.0, 25.0, 45.0};

namespace {

constexpr std::uint64_t kStreamImageProtos = 1;
constexpr std::uint64_t kStreamTextProtos = 2;
constexpr std::uint64_t kStreamStyle = 3;
constexpr std::uint64_t kStreamStudies = 4;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void validate_config(const DatasetConfig& cfg) {
    if (cfg.n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    if (cfg.classes < 2) throw std::invalid_argument("generate_dataset: classes must be >= 2");
    if (!(cfg.ambiguity >= 0.0 && cfg.ambiguity <= 1.0)) {
        throw std::invalid_argument("generate_dataset: ambiguity must be in [0, 1]");
    }
    if (cfg.grid < 2) throw std::invalid_argument("generate_dataset: grid must be >= 2");
    if (cfg.text_dim < 1) throw std::invalid_argument("generate_dataset: text_dim must be >= 1");
    if (cfg.view_noise < 0.0 || cfg.text_noise < 0.0 || cfg.style_img < 0.0 || cfg.style_txt < 0.0) {
        throw std::invalid_argument("generate_dataset: noise and style amplitudes must be >= 0");
    }
}

std::string study_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "study-%06zu", index);
    return buf;
}

}  // namespace

SynthDataset generate_dataset(const DatasetConfig& cfg) {
    validate_config(cfg);
    SynthDataset ds;
    ds.config = cfg;
    const std::size_t hw = cfg.grid * cfg.grid;
    const std::size_t classes = static_cast<std::size_t>(cfg.classes);

    Rng img_rng(derive_seed(cfg.seed, kStreamImageProtos));
    ds.image_prototypes.reserve(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        Grid g(cfg.grid, cfg.grid);
        for (double& v : g.values) v = img_rng.uniform(0.2, 0.8);
        ds.image_prototypes.push_back(std::move(g));
    }

    Rng txt_rng(derive_seed(cfg.seed, kStreamTextProtos));
    ds.text_prototypes.reserve(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> p(cfg.text_dim);
        for (double& v : p) v = txt_rng.normal();
        ds.text_prototypes.push_back(std::move(p));
    }

    // Shared style bases: per-study style coordinates modulate the views
    // through fixed patterns and the sections through a fixed mixing
    // matrix, giving every study a learnable pair-level signature.
    Rng style_rng(derive_seed(cfg.seed, kStreamStyle));
    std::vector<std::vector<double>> img_patterns(cfg.style_dim, std::vector<double>(hw));
    for (auto& pat : img_patterns)
        for (double& v : pat) v = style_rng.uniform(-1.0, 1.0);
    const double txt_mix_scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, cfg.style_dim)));
    std::vector<std::vector<double>> txt_mix(cfg.text_dim, std::vector<double>(cfg.style_dim));
    for (auto& row : txt_mix)
        for (double& v : row) v = style_rng.normal() * txt_mix_scale;

    ds.studies.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        Rng rng(derive_seed(cfg.seed, kStreamStudies, i));
        SynthStudy st;
        st.id = study_id(i);
        st.class_label = static_cast<int>(rng.next_below(classes));
        const bool ambiguous = rng.bernoulli(cfg.ambiguity);
        st.ambiguity = ambiguous ? 1.0 : 0.0;

        const std::vector<double>& own_txt = ds.text_prototypes[static_cast<std::size_t>(st.class_label)];
        std::vector<double> txt_proto = own_txt;
        if (ambiguous) {
            // neighbor on the class ring, mixed at the midpoint
            const int dir = rng.sign();
            const std::size_t neighbor =
                static_cast<std::size_t>((st.class_label + dir + cfg.classes) % cfg.classes);
            const std::vector<double>& other = ds.text_prototypes[neighbor];
            for (std::size_t d = 0; d < cfg.text_dim; ++d) {
                txt_proto[d] = 0.5 * (own_txt[d] + other[d]);
            }
        }

        std::vector<double> style(cfg.style_dim);
        for (double& v : style) v = rng.normal();
        std::vector<double> style_field(hw, 0.0);
        for (std::size_t j = 0; j < cfg.style_dim; ++j) {
            for (std::size_t p = 0; p < hw; ++p) style_field[p] += style[j] * img_patterns[j][p];
        }

        const Grid& img_proto = ds.image_prototypes[static_cast<std::size_t>(st.class_label)];
        for (Grid* view : {&st.view1, &st.view2}) {
            *view = Grid(cfg.grid, cfg.grid);
            for (std::size_t p = 0; p < hw; ++p) {
                view->values[p] = clamp01(img_proto.values[p] + cfg.style_img * style_field[p] +
                                          cfg.view_noise * rng.normal());
            }
        }
        for (std::vector<double>* sect : {&st.sect1, &st.sect2}) {
            sect->resize(cfg.text_dim);
            for (std::size_t d = 0; d < cfg.text_dim; ++d) {
                double mix = 0.0;
                for (std::size_t j = 0; j < cfg.style_dim; ++j) mix += txt_mix[d][j] * style[j];
                (*sect)[d] = txt_proto[d] + cfg.style_txt * mix + cfg.text_noise * rng.normal();
            }
        }
        ds.studies.push_back(std::move(st));
    }
    return ds;
}

SynthDataset generate_dataset(std::size_t n, int classes, double ambiguity, std::uint64_t seed) {
    DatasetConfig cfg;
    cfg.n = n;
    cfg.classes = classes;
    cfg.ambiguity = ambiguity;
    cfg.seed = seed;
    return generate_dataset(cfg);
}

SynthStudy synthesize_missing_view(const SynthStudy& study, std::uint64_t seed,
                                   const MissingViewConfig& cfg) {
    if (study.view1.values.empty()) {
        throw std::invalid_argument("synthesize_missing_view: view1 is required");
    }
    if (cfg.max_shift < 0 || cfg.noise_amp < 0.0) {
        throw std::invalid_argument("synthesize_missing_view: invalid jitter config");
    }
    Rng rng(seed);
    const auto h = static_cast<long>(study.view1.height);
    const auto w = static_cast<long>(study.view1.width);
    long dy = 0, dx = 0;
    if (cfg.max_shift > 0) {
        const long span = 2L * cfg.max_shift + 1;
        dy = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(span))) - cfg.max_shift;
        dx = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(span))) - cfg.max_shift;
    }
    Grid v2(study.view1.height, study.view1.width);
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            const long sr = r + dy;
            const long sc = c + dx;
            const bool inside = sr >= 0 && sr < h && sc >= 0 && sc < w;
            v2.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                inside ? study.view1.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc))
                       : 0.0;
        }
    }
    for (double& v : v2.values) v = clamp01(v + rng.uniform(-cfg.noise_amp, cfg.noise_amp));
    SynthStudy out = study;
    out.view2 = std::move(v2);
    return out;
}

const char* perturb_kind_name(PerturbKind kind) {
    switch (kind) {
        case PerturbKind::blur: return "blur";
        case PerturbKind::noise: return "noise";
        case PerturbKind::brightness_contrast: return "brightness_contrast";
        case PerturbKind::rotation: return "rotation";
    }
    throw std::invalid_argument("perturb_kind_name: unknown kind");
}

PerturbKind perturb_kind_from_name(const std::string& name) {
    if (name == "blur") return PerturbKind::blur;
    if (name == "noise") return PerturbKind::noise;
    if (name == "brightness_contrast") return PerturbKind::brightness_contrast;
    if (name == "rotation") return PerturbKind::rotation;
    throw std::invalid_argument("unknown perturbation kind: " + name);
}

namespace {

Grid gaussian_blur(const Grid& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(2.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double v = std::exp(-(static_cast<double>(t) * t) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(t + radius)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;

    const auto h = static_cast<long>(img.height);
    const auto w = static_cast<long>(img.width);
    auto clamp_idx = [](long i, long n) { return std::min(n - 1, std::max(0L, i)); };

    Grid tmp(img.height, img.width);
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                acc += kernel[static_cast<std::size_t>(t + radius)] *
                       img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(clamp_idx(c + t, w)));
            }
            tmp.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
        }
    }
    Grid out(img.height, img.width);
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                acc += kernel[static_cast<std::size_t>(t + radius)] *
                       tmp.at(static_cast<std::size_t>(clamp_idx(r + t, h)), static_cast<std::size_t>(c));
            }
            out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
        }
    }
    return out;
}

// Counterclockwise quarter turn of a square grid.
Grid rot90_square(const Grid& img) {
    const std::size_t n = img.height;
    Grid out(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out.at(r, c) = img.at(c, n - 1 - r);
    return out;
}

double bilinear_sample(const Grid& g, double r, double c) {
    const double fr = std::floor(r);
    const double fc = std::floor(c);
    const long r0 = static_cast<long>(fr);
    const long c0 = static_cast<long>(fc);
    const double wr = r - fr;
    const double wc = c - fc;
    const auto h = static_cast<long>(g.height);
    const auto w = static_cast<long>(g.width);
    auto pick = [&](long rr, long cc) -> double {
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) return 0.0;
        return g.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
    };
    return (1.0 - wr) * ((1.0 - wc) * pick(r0, c0) + wc * pick(r0, c0 + 1)) +
           wr * ((1.0 - wc) * pick(r0 + 1, c0) + wc * pick(r0 + 1, c0 + 1));
}

}  // namespace

Grid rotate_grid(const Grid& img, double degrees) {
    double a = std::fmod(degrees, 360.0);
    if (a < 0.0) a += 360.0;
    if (a == 0.0) return img;
    if (img.height == img.width) {
        if (a == 90.0) return rot90_square(img);
        if (a == 180.0) return rot90_square(rot90_square(img));
        if (a == 270.0) return rot90_square(rot90_square(rot90_square(img)));
    }
    const double rad = a * std::numbers::pi / 180.0;
    const double cs = std::cos(rad);
    const double sn = std::sin(rad);
    const double cr = (static_cast<double>(img.height) - 1.0) / 2.0;
    const double cc = (static_cast<double>(img.width) - 1.0) / 2.0;
    Grid out(img.height, img.width);
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            const double dr = static_cast<double>(r) - cr;
            const double dc = static_cast<double>(c) - cc;
            const double src_r = cr + cs * dr + sn * dc;
            const double src_c = cc - sn * dr + cs * dc;
            out.at(r, c) = bilinear_sample(img, src_r, src_c);
        }
    }
    return out;
}

Grid perturb_image(const Grid& img, const PerturbSpec& spec) {
    for (double v : img.values) {
        if (!std::isfinite(v)) throw std::invalid_argument("perturb_image: non-finite input");
    }
    if (spec.severity == 0) return img;
    if (spec.severity < 0 || spec.severity > 5) {
        throw std::invalid_argument("perturb_image: severity must be in [0, 5]");
    }
    const std::size_t idx = static_cast<std::size_t>(spec.severity - 1);
    switch (spec.kind) {
        case PerturbKind::blur:
            return gaussian_blur(img, kBlurSigma[idx]);
        case PerturbKind::noise: {
            Rng rng(spec.seed);
            Grid out = img;
            for (double& v : out.values) v = clamp01(v + kNoiseStd[idx] * rng.normal());
            return out;
        }
        case PerturbKind::brightness_contrast: {
            Rng rng(spec.seed);
            const double delta = kBrightnessContrast[idx];
            const double alpha = 1.0 + rng.sign() * delta;          // contrast about mid-gray
            const double beta = rng.sign() * delta * 0.5;           // brightness shift
            Grid out = img;
            for (double& v : out.values) v = clamp01((v - 0.5) * alpha + 0.5 + beta);
            return out;
        }
        case PerturbKind::rotation: {
            Rng rng(spec.seed);
            const double deg = rng.sign() * kRotationDeg[idx];
            Grid out = rotate_grid(img, deg);
            for (double& v : out.values) v = clamp01(v);
            return out;
        }
    }
    throw std::invalid_argument("perturb_image: unknown kind");
}

namespace {
constexpr char kDatasetMagic[4] = {'P', 'G', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

std::vector<double> to_f64(const std::vector<float>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
    return out;
}
}  // namespace

void write_dataset(const SynthDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
    try {
        const DatasetConfig& c = dataset.config;
        binio::write_bytes(out, kDatasetMagic, 4);
        binio::write_pod<std::uint32_t>(out, kDatasetVersion);
        binio::write_pod<std::uint64_t>(out, c.n);
        binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.classes));
        binio::write_pod<double>(out, c.ambiguity);
        binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.grid));
        binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.text_dim));
        binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.style_dim));
        binio::write_pod<double>(out, c.style_img);
        binio::write_pod<double>(out, c.style_txt);
        binio::write_pod<double>(out, c.view_noise);
        binio::write_pod<double>(out, c.text_noise);
        binio::write_pod<std::uint64_t>(out, c.seed);
        binio::write_pod<std::uint64_t>(out, dataset.studies.size());
        for (const Grid& g : dataset.image_prototypes) binio::write_f32_array(out, to_f32(g.values));
        for (const auto& p : dataset.text_prototypes) binio::write_f32_array(out, to_f32(p));
        for (const SynthStudy& st : dataset.studies) {
            binio::write_string(out, st.id);
            binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(st.class_label));
            binio::write_pod<float>(out, static_cast<float>(st.ambiguity));
            binio::write_f32_array(out, to_f32(st.view1.values));
            binio::write_f32_array(out, to_f32(st.view2.values));
            binio::write_f32_array(out, to_f32(st.sect1));
            binio::write_f32_array(out, to_f32(st.sect2));
        }
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [" + path + "]");
    }
}

SynthDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
    try {
        char magic[4];
        binio::read_bytes(in, magic, 4);
        if (std::string(magic, 4) != std::string(kDatasetMagic, 4)) {
            throw std::runtime_error("bad magic, not a dataset file");
        }
        const auto version = binio::read_pod<std::uint32_t>(in);
        if (version != kDatasetVersion) {
            throw std::runtime_error("unsupported dataset version " + std::to_string(version));
        }
        SynthDataset ds;
        DatasetConfig& c = ds.config;
        c.n = binio::read_pod<std::uint64_t>(in);
        c.classes = static_cast<int>(binio::read_pod<std::uint32_t>(in));
        c.ambiguity = binio::read_pod<double>(in);
        c.grid = binio::read_pod<std::uint32_t>(in);
        c.text_dim = binio::read_pod<std::uint32_t>(in);
        c.style_dim = binio::read_pod<std::uint32_t>(in);
        c.style_img = binio::read_pod<double>(in);
        c.style_txt = binio::read_pod<double>(in);
        c.view_noise = binio::read_pod<double>(in);
        c.text_noise = binio::read_pod<double>(in);
        c.seed = binio::read_pod<std::uint64_t>(in);
        const auto count = binio::read_pod<std::uint64_t>(in);
        const std::size_t hw = c.grid * c.grid;
        for (int cls = 0; cls < c.classes; ++cls) {
            Grid g(c.grid, c.grid);
            g.values = to_f64(binio::read_f32_array(in, hw));
            ds.image_prototypes.push_back(std::move(g));
        }
        for (int cls = 0; cls < c.classes; ++cls) {
            ds.text_prototypes.push_back(to_f64(binio::read_f32_array(in, c.text_dim)));
        }
        std::unordered_set<std::string> seen;
        ds.studies.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            SynthStudy st;
            st.id = binio::read_string(in);
            if (!seen.insert(st.id).second) {
                throw std::runtime_error("duplicate study id: " + st.id);
            }
            st.class_label = static_cast<int>(binio::read_pod<std::uint32_t>(in));
            if (st.class_label < 0 || st.class_label >= c.classes) {
                throw std::runtime_error("study class out of range");
            }
            st.ambiguity = static_cast<double>(binio::read_pod<float>(in));
            st.view1 = Grid(c.grid, c.grid);
            st.view1.values = to_f64(binio::read_f32_array(in, hw));
            st.view2 = Grid(c.grid, c.grid);
            st.view2.values = to_f64(binio::read_f32_array(in, hw));
            st.sect1 = to_f64(binio::read_f32_array(in, c.text_dim));
            st.sect2 = to_f64(binio::read_f32_array(in, c.text_dim));
            ds.studies.push_back(std::move(st));
        }
        return ds;
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [" + path + "]");
    }
}

void write_dataset_manifest(const SynthDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dataset_manifest: cannot open " + path);
    const DatasetConfig& c = dataset.config;
    std::size_t ambiguous = 0;
    for (const auto& st : dataset.studies)
        if (st.ambiguity > 0.0) ++ambiguous;
    out << "format = pgds.v1\n";
    out << "n = " << c.n << "\n";
    out << "classes = " << c.classes << "\n";
    out << "ambiguity = " << textio::fmt_g(c.ambiguity) << "\n";
    out << "grid = " << c.grid << "\n";
    out << "text_dim = " << c.text_dim << "\n";
    out << "style_dim = " << c.style_dim << "\n";
    out << "style_img = " << textio::fmt_g(c.style_img) << "\n";
    out << "style_txt = " << textio::fmt_g(c.style_txt) << "\n";
    out << "view_noise = " << textio::fmt_g(c.view_noise) << "\n";
    out << "text_noise = " << textio::fmt_g(c.text_noise) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "studies = " << dataset.studies.size() << "\n";
    out << "ambiguous_studies = " << ambiguous << "\n";
    if (!out) throw std::runtime_error("write_dataset_manifest: I/O failure [" + path + "]");
}

}  // namespace probembed
