#include "vidinr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vidinr/errors.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'", key);
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a real number, got '" + v + "'", key);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'", key);
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

}  // namespace

const std::vector<std::string>& Config::keys() {
    static const std::vector<std::string> k{
        "resolution", "frames", "dim_zI", "dim_zM", "hidden", "body_layers", "mod_rank", "mapping_hidden",
        "progressive_stages", "sigma_x", "sigma_y", "sigma_t", "use_small_sigma_t", "use_z_M", "use_f_M",
        "d_channels", "batch_size", "lr_g", "lr_d", "beta1", "beta2", "r1_gamma", "r1_interval", "ema_decay",
        "diffaug", "total_steps", "seed", "data_source", "frames_dir", "dataset_size", "stride",
        "checkpoint_every", "sample_every", "eval_every", "eval_samples", "embedder_steps"};
    return k;
}

void Config::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    auto& g = generator;
    auto& t = train;
    if (key == "resolution") discriminator.resolution = parse_int(key, v);
    else if (key == "frames") t.frames = parse_int(key, v);
    else if (key == "dim_zI") g.dim_zI = parse_int(key, v);
    else if (key == "dim_zM") g.dim_zM = parse_int(key, v);
    else if (key == "hidden") g.hidden = parse_int(key, v);
    else if (key == "body_layers") g.body_layers = parse_int(key, v);
    else if (key == "mod_rank") g.mod_rank = parse_int(key, v);
    else if (key == "mapping_hidden") g.mapping_hidden = parse_int(key, v);
    else if (key == "progressive_stages") g.progressive_stages = parse_int(key, v);
    else if (key == "sigma_x") g.sigma_x = parse_real(key, v);
    else if (key == "sigma_y") g.sigma_y = parse_real(key, v);
    else if (key == "sigma_t") g.sigma_t = parse_real(key, v);
    else if (key == "use_small_sigma_t") g.use_small_sigma_t = parse_bool(key, v);
    else if (key == "use_z_M") g.use_z_M = parse_bool(key, v);
    else if (key == "use_f_M") g.use_f_M = parse_bool(key, v);
    else if (key == "d_channels") discriminator.channels = parse_int(key, v);
    else if (key == "batch_size") t.batch_size = parse_int(key, v);
    else if (key == "lr_g") t.lr_g = parse_real(key, v);
    else if (key == "lr_d") t.lr_d = parse_real(key, v);
    else if (key == "beta1") t.beta1 = parse_real(key, v);
    else if (key == "beta2") t.beta2 = parse_real(key, v);
    else if (key == "r1_gamma") t.r1_gamma = parse_real(key, v);
    else if (key == "r1_interval") t.r1_interval = parse_int(key, v);
    else if (key == "ema_decay") t.ema_decay = parse_real(key, v);
    else if (key == "diffaug") {
        t.diffaug.clear();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty() || item == "none") continue;
            if (item != "color" && item != "translation")
                throw ConfigError("diffaug: unsupported policy '" + item + "' (allowed: color, translation)", key);
            t.diffaug.insert(item);
        }
    } else if (key == "total_steps") t.total_steps = parse_int(key, v);
    else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int(key, v));
    else if (key == "data_source") data.source = v;
    else if (key == "frames_dir") data.frames_dir = v;
    else if (key == "dataset_size") data.dataset_size = parse_int(key, v);
    else if (key == "stride") data.stride = parse_int(key, v);
    else if (key == "checkpoint_every") run.checkpoint_every = parse_int(key, v);
    else if (key == "sample_every") run.sample_every = parse_int(key, v);
    else if (key == "eval_every") run.eval_every = parse_int(key, v);
    else if (key == "eval_samples") run.eval_samples = parse_int(key, v);
    else if (key == "embedder_steps") run.embedder_steps = parse_int(key, v);
    else throw ConfigError("unknown config key '" + key + "'", key);
}

void Config::validate() const {
    generator.validate();
    discriminator.validate();
    auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what, key); };
    if (train.frames < 2) fail("frames", "must be >= 2");
    if (train.batch_size < 1) fail("batch_size", "must be >= 1");
    if (train.lr_g < 0) fail("lr_g", "must be >= 0");
    if (train.lr_d < 0) fail("lr_d", "must be >= 0");
    if (!(train.beta1 >= 0 && train.beta1 < 1)) fail("beta1", "must be in [0, 1)");
    if (!(train.beta2 >= 0 && train.beta2 < 1)) fail("beta2", "must be in [0, 1)");
    if (!(train.r1_gamma >= 0)) fail("r1_gamma", "must be >= 0");
    if (train.r1_interval < 1) fail("r1_interval", "must be >= 1");
    if (!(train.ema_decay > 0 && train.ema_decay < 1)) fail("ema_decay", "must be in (0, 1)");
    if (train.total_steps < 0) fail("total_steps", "must be >= 0");
    if (data.source != "two_circles" && data.source != "frames") fail("data_source", "must be two_circles or frames");
    if (data.source == "frames" && data.frames_dir.empty()) fail("frames_dir", "required when data_source=frames");
    if (data.dataset_size < 2) fail("dataset_size", "must be >= 2");
    if (data.stride < 1) fail("stride", "must be >= 1");
    if (run.eval_samples < 2) fail("eval_samples", "must be >= 2");
}

std::string Config::to_text() const {
    std::ostringstream os;
    const auto& g = generator;
    const auto& t = train;
    std::string aug;
    for (const auto& a : t.diffaug) aug += (aug.empty() ? "" : ",") + a;
    if (aug.empty()) aug = "none";
    os << "resolution=" << discriminator.resolution << "\n"
       << "frames=" << t.frames << "\n"
       << "dim_zI=" << g.dim_zI << "\n"
       << "dim_zM=" << g.dim_zM << "\n"
       << "hidden=" << g.hidden << "\n"
       << "body_layers=" << g.body_layers << "\n"
       << "mod_rank=" << g.mod_rank << "\n"
       << "mapping_hidden=" << g.mapping_hidden << "\n"
       << "progressive_stages=" << g.progressive_stages << "\n"
       << "sigma_x=" << fmt_real(g.sigma_x) << "\n"
       << "sigma_y=" << fmt_real(g.sigma_y) << "\n"
       << "sigma_t=" << fmt_real(g.sigma_t) << "\n"
       << "use_small_sigma_t=" << fmt_bool(g.use_small_sigma_t) << "\n"
       << "use_z_M=" << fmt_bool(g.use_z_M) << "\n"
       << "use_f_M=" << fmt_bool(g.use_f_M) << "\n"
       << "d_channels=" << discriminator.channels << "\n"
       << "batch_size=" << t.batch_size << "\n"
       << "lr_g=" << fmt_real(t.lr_g) << "\n"
       << "lr_d=" << fmt_real(t.lr_d) << "\n"
       << "beta1=" << fmt_real(t.beta1) << "\n"
       << "beta2=" << fmt_real(t.beta2) << "\n"
       << "r1_gamma=" << fmt_real(t.r1_gamma) << "\n"
       << "r1_interval=" << t.r1_interval << "\n"
       << "ema_decay=" << fmt_real(t.ema_decay) << "\n"
       << "diffaug=" << aug << "\n"
       << "total_steps=" << t.total_steps << "\n"
       << "seed=" << t.seed << "\n"
       << "data_source=" << data.source << "\n"
       << "frames_dir=" << data.frames_dir << "\n"
       << "dataset_size=" << data.dataset_size << "\n"
       << "stride=" << data.stride << "\n"
       << "checkpoint_every=" << run.checkpoint_every << "\n"
       << "sample_every=" << run.sample_every << "\n"
       << "eval_every=" << run.eval_every << "\n"
       << "eval_samples=" << run.eval_samples << "\n"
       << "embedder_steps=" << run.embedder_steps << "\n";
    return os.str();
}

std::uint64_t Config::digest() const { return fnv1a64(to_text()); }

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line is not key=value: '" + line + "'", lineno);
        cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

Config desk_config() { return Config{}; }

}  // namespace vidinr
