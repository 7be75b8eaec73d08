#include "probembed/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "textio.hpp"

namespace probembed {

const char* objective_name(Objective o) { return o == Objective::prob ? "prob" : "infonce"; }

Objective objective_from_name(const std::string& name) {
    if (name == "prob") return Objective::prob;
    if (name == "infonce") return Objective::infonce;
    throw std::invalid_argument("unknown objective: " + name);
}

const char* schedule_name(LrSchedule s) {
    return s == LrSchedule::constant ? "constant" : "cosine";
}

LrSchedule schedule_from_name(const std::string& name) {
    if (name == "constant") return LrSchedule::constant;
    if (name == "cosine") return LrSchedule::cosine;
    throw std::invalid_argument("unknown schedule: " + name);
}

const char* bce_mode_name(BceMode m) {
    return m == BceMode::standard ? "standard" : "paper_literal";
}

BceMode bce_mode_from_name(const std::string& name) {
    if (name == "standard") return BceMode::standard;
    if (name == "paper_literal") return BceMode::paper_literal;
    throw std::invalid_argument("unknown bce mode: " + name);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': invalid number '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw std::invalid_argument("config key '" + key + "': invalid integer '" + value + "'");
    }
    return v;
}

int parse_int(const std::string& key, const std::string& value) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw std::invalid_argument("config key '" + key + "': invalid integer '" + value + "'");
    }
    return v;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_int(key, item));
    }
    if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

std::string render_int_list(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") { cfg.seed = parse_u64(key, value); return; }

    if (key == "data.n") { cfg.data.n = parse_u64(key, value); return; }
    if (key == "data.classes") { cfg.data.classes = parse_int(key, value); return; }
    if (key == "data.ambiguity") { cfg.data.ambiguity = parse_double(key, value); return; }
    if (key == "data.grid") { cfg.data.grid = parse_u64(key, value); return; }
    if (key == "data.text_dim") { cfg.data.text_dim = parse_u64(key, value); return; }
    if (key == "data.style_dim") { cfg.data.style_dim = parse_u64(key, value); return; }
    if (key == "data.style_img") { cfg.data.style_img = parse_double(key, value); return; }
    if (key == "data.style_txt") { cfg.data.style_txt = parse_double(key, value); return; }
    if (key == "data.view_noise") { cfg.data.view_noise = parse_double(key, value); return; }
    if (key == "data.text_noise") { cfg.data.text_noise = parse_double(key, value); return; }

    if (key == "train.objective") { cfg.train.objective = objective_from_name(value); return; }
    if (key == "train.epochs") { cfg.train.epochs = parse_u64(key, value); return; }
    if (key == "train.batch_size") { cfg.train.batch_size = parse_u64(key, value); return; }
    if (key == "train.base_lr") { cfg.train.base_lr = parse_double(key, value); return; }
    if (key == "train.min_lr") { cfg.train.min_lr = parse_double(key, value); return; }
    if (key == "train.weight_decay") { cfg.train.weight_decay = parse_double(key, value); return; }
    if (key == "train.clip_max_norm") { cfg.train.clip_max_norm = parse_double(key, value); return; }
    if (key == "train.schedule") { cfg.train.schedule = schedule_from_name(value); return; }
    if (key == "train.beta1") { cfg.train.beta1 = parse_double(key, value); return; }
    if (key == "train.beta2") { cfg.train.beta2 = parse_double(key, value); return; }
    if (key == "train.adam_eps") { cfg.train.adam_eps = parse_double(key, value); return; }
    if (key == "train.embed_dim") { cfg.train.embed_dim = parse_u64(key, value); return; }
    if (key == "train.hidden1") { cfg.train.hidden1 = parse_u64(key, value); return; }
    if (key == "train.hidden2") { cfg.train.hidden2 = parse_u64(key, value); return; }
    if (key == "train.infonce_temperature") {
        cfg.train.infonce_temperature = parse_double(key, value);
        return;
    }

    if (key == "loss.lambda_img") { cfg.loss.lambda_img = parse_double(key, value); return; }
    if (key == "loss.lambda_txt") { cfg.loss.lambda_txt = parse_double(key, value); return; }
    if (key == "loss.beta_img") { cfg.loss.beta_img = parse_double(key, value); return; }
    if (key == "loss.beta_txt") { cfg.loss.beta_txt = parse_double(key, value); return; }
    if (key == "loss.mode") { cfg.loss.mode = bce_mode_from_name(value); return; }
    if (key == "loss.positive_weight") {
        cfg.loss.positive_weight = parse_double(key, value);
        return;
    }

    if (key == "eval.ks") { cfg.eval_ks = parse_int_list(key, value); return; }
    if (key == "eval.confidence") {
        cfg.eval_confidence = confidence_source_from_name(value);
        return;
    }
    if (key == "eval.ece_bins") { cfg.ece_bins = parse_u64(key, value); return; }
    if (key == "eval.severities") { cfg.perturb_severities = parse_int_list(key, value); return; }

    throw std::invalid_argument("unknown config key: " + key);
}

void RunConfig::propagate_seed() {
    data.seed = seed;
    train.seed = seed;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key or value");
        }
        apply_config_entry(cfg, key, value);
    }
    cfg.propagate_seed();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string render_config(const RunConfig& cfg) {
    using textio::fmt_g;
    std::ostringstream out;
    out << "seed = " << cfg.seed << "\n";
    out << "data.n = " << cfg.data.n << "\n";
    out << "data.classes = " << cfg.data.classes << "\n";
    out << "data.ambiguity = " << fmt_g(cfg.data.ambiguity) << "\n";
    out << "data.grid = " << cfg.data.grid << "\n";
    out << "data.text_dim = " << cfg.data.text_dim << "\n";
    out << "data.style_dim = " << cfg.data.style_dim << "\n";
    out << "data.style_img = " << fmt_g(cfg.data.style_img) << "\n";
    out << "data.style_txt = " << fmt_g(cfg.data.style_txt) << "\n";
    out << "data.view_noise = " << fmt_g(cfg.data.view_noise) << "\n";
    out << "data.text_noise = " << fmt_g(cfg.data.text_noise) << "\n";
    out << "train.objective = " << objective_name(cfg.train.objective) << "\n";
    out << "train.epochs = " << cfg.train.epochs << "\n";
    out << "train.batch_size = " << cfg.train.batch_size << "\n";
    out << "train.base_lr = " << fmt_g(cfg.train.base_lr) << "\n";
    out << "train.min_lr = " << fmt_g(cfg.train.min_lr) << "\n";
    out << "train.weight_decay = " << fmt_g(cfg.train.weight_decay) << "\n";
    out << "train.clip_max_norm = " << fmt_g(cfg.train.clip_max_norm) << "\n";
    out << "train.schedule = " << schedule_name(cfg.train.schedule) << "\n";
    out << "train.beta1 = " << fmt_g(cfg.train.beta1) << "\n";
    out << "train.beta2 = " << fmt_g(cfg.train.beta2) << "\n";
    out << "train.adam_eps = " << fmt_g(cfg.train.adam_eps) << "\n";
    out << "train.embed_dim = " << cfg.train.embed_dim << "\n";
    out << "train.hidden1 = " << cfg.train.hidden1 << "\n";
    out << "train.hidden2 = " << cfg.train.hidden2 << "\n";
    out << "train.infonce_temperature = " << fmt_g(cfg.train.infonce_temperature) << "\n";
    out << "loss.lambda_img = " << fmt_g(cfg.loss.lambda_img) << "\n";
    out << "loss.lambda_txt = " << fmt_g(cfg.loss.lambda_txt) << "\n";
    out << "loss.beta_img = " << fmt_g(cfg.loss.beta_img) << "\n";
    out << "loss.beta_txt = " << fmt_g(cfg.loss.beta_txt) << "\n";
    out << "loss.mode = " << bce_mode_name(cfg.loss.mode) << "\n";
    out << "loss.positive_weight = " << fmt_g(cfg.loss.positive_weight) << "\n";
    out << "eval.ks = " << render_int_list(cfg.eval_ks) << "\n";
    out << "eval.confidence = " << confidence_source_name(cfg.eval_confidence) << "\n";
    out << "eval.ece_bins = " << cfg.ece_bins << "\n";
    out << "eval.severities = " << render_int_list(cfg.perturb_severities) << "\n";
    return out.str();
}

}  // namespace probembed
