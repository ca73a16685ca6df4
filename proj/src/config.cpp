// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include "deepbroadcast/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace deepbroadcast::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double x) {
    if (x == std::numeric_limits<double>::infinity()) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw config_error(key + ": expected a number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw config_error(key + ": expected an integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw config_error(key + ": expected true/false, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    if (out.empty()) throw config_error(key + ": empty list");
    return out;
}

std::vector<int> parse_int_list_allow_empty(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<int>(parse_int(key, item)));
    }
    return out;
}

std::vector<std::string> parse_string_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs, const std::string& sep,
                 std::string (*fmt)(const T&)) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += fmt(xs[i]);
    }
    return out;
}

std::string fmt_double_ref(const double& x) { return fmt_double(x); }
std::string fmt_int_ref(const int& x) { return std::to_string(x); }
std::string fmt_string_ref(const std::string& x) { return x; }

/// Flat key-value view shared by the serializer and parser; the serialized
/// key set doubles as the override schema.
class KvMap {
public:
    void set(const std::string& k, const std::string& v) { map_[k] = v; }

    bool has(const std::string& k) const { return map_.count(k) != 0; }

    const std::string& get(const std::string& k) {
        auto it = map_.find(k);
        if (it == map_.end()) throw config_error("missing config key: " + k);
        consumed_.insert(k);
        return it->second;
    }

    std::string get_or(const std::string& k, const std::string& fallback) {
        auto it = map_.find(k);
        if (it == map_.end()) return fallback;
        consumed_.insert(k);
        return it->second;
    }

    void check_all_consumed() const {
        for (const auto& [k, v] : map_)
            if (!consumed_.count(k)) throw config_error("unknown config key: " + k);
    }

private:
    std::map<std::string, std::string> map_;
    std::set<std::string> consumed_;
};

KvMap text_to_map(const std::string& text) {
    KvMap kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
        kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

ExperimentConfig from_map(KvMap& kv) {
    ExperimentConfig cfg;
    cfg.preset = kv.get_or("preset", "custom");
    cfg.variant = kv.get("variant");

    const int n = static_cast<int>(parse_int("n_users", kv.get("n_users")));
    if (n < 1) throw config_error("n_users must be >= 1");

    cfg.model.c1 = parse_int("model.c1", kv.get("model.c1"));
    cfg.model.h1 = parse_int("model.h1", kv.get("model.h1"));
    cfg.model.w1 = parse_int("model.w1", kv.get("model.w1"));
    cfg.model.c_tx = parse_int("model.c_tx", kv.get("model.c_tx"));
    cfg.model.gcf_query_hidden =
        parse_int("model.gcf_query_hidden", kv.get("model.gcf_query_hidden"));
    cfg.model.fusion_hidden = parse_int("model.fusion_hidden", kv.get("model.fusion_hidden"));
    cfg.model.rx_width = parse_int("model.rx_width", kv.get("model.rx_width"));
    cfg.model.rx_exec_hidden = parse_int("model.rx_exec_hidden", kv.get("model.rx_exec_hidden"));

    for (int i = 0; i < n; ++i) {
        const std::string p = "user" + std::to_string(i) + ".";
        UserSpec u;
        u.task.task_id = kv.get(p + "task.id");
        const std::string kind = kv.get(p + "task.kind");
        if (kind == "classify")
            u.task.kind = data::TaskSpec::Kind::classify;
        else if (kind == "recover")
            u.task.kind = data::TaskSpec::Kind::recover;
        else
            throw config_error(p + "task.kind: expected classify|recover, got '" + kind + "'");
        u.task.n_label =
            static_cast<int>(parse_int(p + "task.n_label", kv.get(p + "task.n_label")));
        u.task.positive =
            parse_int_list_allow_empty(p + "task.positive", kv.get_or(p + "task.positive", ""));
        u.channel.kind = chansim::channel_kind_from_string(kv.get(p + "channel.kind"));
        u.channel.rician_a = parse_double(p + "channel.rician_a", kv.get(p + "channel.rician_a"));
        u.channel.snr_db = parse_double(p + "channel.snr_db", kv.get(p + "channel.snr_db"));
        const std::string fading = kv.get(p + "channel.fading");
        if (fading == "per_symbol")
            u.channel.fading_mode = chansim::FadingMode::per_symbol;
        else if (fading == "per_block")
            u.channel.fading_mode = chansim::FadingMode::per_block;
        else
            throw config_error(p + "channel.fading: expected per_symbol|per_block");
        u.channel.equalize = parse_bool(p + "channel.equalize", kv.get(p + "channel.equalize"));
        cfg.users.push_back(std::move(u));
    }

    cfg.loss.task_w = parse_double_list("loss.task_w", kv.get("loss.task_w"));
    cfg.loss.beta = parse_double("loss.beta", kv.get("loss.beta"));
    cfg.loss.gamma = parse_double_list("loss.gamma", kv.get("loss.gamma"));

    cfg.train.epochs = parse_int("train.epochs", kv.get("train.epochs"));
    cfg.train.batch = parse_int("train.batch", kv.get("train.batch"));
    cfg.train.lr = parse_double("train.lr", kv.get("train.lr"));
    cfg.train.lr_decay = parse_double("train.lr_decay", kv.get("train.lr_decay"));
    cfg.train.seed = static_cast<std::uint64_t>(parse_int("train.seed", kv.get("train.seed")));
    cfg.train.snr_list = parse_double_list("train.snr_list", kv.get("train.snr_list"));
    cfg.train.clip_norm = parse_double("train.clip_norm", kv.get("train.clip_norm"));
    cfg.train.stochastic = parse_bool("train.stochastic", kv.get("train.stochastic"));
    cfg.train.continuous_snr = parse_bool("train.continuous_snr", kv.get("train.continuous_snr"));
    cfg.train.save_every = parse_int("train.save_every", kv.get("train.save_every"));

    cfg.eval_grid = parse_double_list("eval.grid", kv.get("eval.grid"));
    cfg.eval_repeats = static_cast<int>(parse_int("eval.repeats", kv.get("eval.repeats")));
    cfg.compare_variants = parse_string_list(kv.get_or("compare", ""));
    cfg.data_dir = kv.get("data_dir");
    cfg.out_dir = kv.get("out_dir");

    kv.check_all_consumed();
    cfg.finalize();
    return cfg;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw config_error("train.epochs must be >= 1");
    if (batch < 1) throw config_error("train.batch must be >= 1");
    if (!(lr > 0)) throw config_error("train.lr must be positive");
    if (!(lr_decay > 0)) throw config_error("train.lr_decay must be positive");
    if (snr_list.empty()) throw config_error("train.snr_list must be nonempty");
    if (clip_norm < 0) throw config_error("train.clip_norm must be >= 0");
    if (save_every < 1) throw config_error("train.save_every must be >= 1");
}

void ExperimentConfig::finalize() {
    if (users.empty()) throw config_error("config: at least one user required");
    model.n_users = n_users();
    model.heads.clear();
    for (const auto& u : users) {
        u.task.validate();
        u.channel.validate();
        nn::TaskHead head;
        head.kind = u.task.kind == data::TaskSpec::Kind::recover ? nn::TaskHead::Kind::recover
                                                                 : nn::TaskHead::Kind::classify;
        head.n_label = u.task.n_label;
        model.heads.push_back(head);
    }
    (void)nn::variant_from_string(variant);
    model.validate();
    loss.validate(n_users());
    train.validate();
    if (eval_grid.empty()) throw config_error("eval.grid must be nonempty");
    if (eval_repeats < 1) throw config_error("eval.repeats must be >= 1");
}

std::string serialize(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "# deepbroadcast experiment config\n";
    os << "preset = " << cfg.preset << "\n";
    os << "variant = " << cfg.variant << "\n";
    os << "n_users = " << cfg.users.size() << "\n";
    os << "\n";
    os << "model.c1 = " << cfg.model.c1 << "\n";
    os << "model.h1 = " << cfg.model.h1 << "\n";
    os << "model.w1 = " << cfg.model.w1 << "\n";
    os << "model.c_tx = " << cfg.model.c_tx << "\n";
    os << "model.gcf_query_hidden = " << cfg.model.gcf_query_hidden << "\n";
    os << "model.fusion_hidden = " << cfg.model.fusion_hidden << "\n";
    os << "model.rx_width = " << cfg.model.rx_width << "\n";
    os << "model.rx_exec_hidden = " << cfg.model.rx_exec_hidden << "\n";
    for (std::size_t i = 0; i < cfg.users.size(); ++i) {
        const auto& u = cfg.users[i];
        const std::string p = "user" + std::to_string(i) + ".";
        os << "\n";
        os << p << "task.id = " << u.task.task_id << "\n";
        os << p << "task.kind = "
           << (u.task.kind == data::TaskSpec::Kind::recover ? "recover" : "classify") << "\n";
        os << p << "task.n_label = " << u.task.n_label << "\n";
        os << p << "task.positive = " << join(u.task.positive, ",", fmt_int_ref) << "\n";
        os << p << "channel.kind = " << chansim::to_string(u.channel.kind) << "\n";
        os << p << "channel.rician_a = " << fmt_double(u.channel.rician_a) << "\n";
        os << p << "channel.snr_db = " << fmt_double(u.channel.snr_db) << "\n";
        os << p << "channel.fading = "
           << (u.channel.fading_mode == chansim::FadingMode::per_block ? "per_block"
                                                                       : "per_symbol")
           << "\n";
        os << p << "channel.equalize = " << (u.channel.equalize ? "true" : "false") << "\n";
    }
    os << "\n";
    os << "loss.task_w = " << join(cfg.loss.task_w, ",", fmt_double_ref) << "\n";
    os << "loss.beta = " << fmt_double(cfg.loss.beta) << "\n";
    os << "loss.gamma = " << join(cfg.loss.gamma, ",", fmt_double_ref) << "\n";
    os << "\n";
    os << "train.epochs = " << cfg.train.epochs << "\n";
    os << "train.batch = " << cfg.train.batch << "\n";
    os << "train.lr = " << fmt_double(cfg.train.lr) << "\n";
    os << "train.lr_decay = " << fmt_double(cfg.train.lr_decay) << "\n";
    os << "train.seed = " << cfg.train.seed << "\n";
    os << "train.snr_list = " << join(cfg.train.snr_list, ",", fmt_double_ref) << "\n";
    os << "train.clip_norm = " << fmt_double(cfg.train.clip_norm) << "\n";
    os << "train.stochastic = " << (cfg.train.stochastic ? "true" : "false") << "\n";
    os << "train.continuous_snr = " << (cfg.train.continuous_snr ? "true" : "false") << "\n";
    os << "train.save_every = " << cfg.train.save_every << "\n";
    os << "\n";
    os << "eval.grid = " << join(cfg.eval_grid, ",", fmt_double_ref) << "\n";
    os << "eval.repeats = " << cfg.eval_repeats << "\n";
    os << "compare = " << join(cfg.compare_variants, ",", fmt_string_ref) << "\n";
    os << "data_dir = " << cfg.data_dir << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    return os.str();
}

ExperimentConfig parse(const std::string& text) {
    KvMap kv = text_to_map(text);
    return from_map(kv);
}

ExperimentConfig load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const std::string text = serialize(cfg);
    KvMap schema = text_to_map(text);
    if (!schema.has(key)) throw config_error("unknown config key: " + key);
    schema.set(key, value);
    cfg = from_map(schema);
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = serialize(cfg);
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (const char c : text) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(h ^ (h >> 32)));
    return buf;
}

namespace {

UserSpec make_user(std::string id, data::TaskSpec::Kind kind, int n_label,
                   std::vector<int> positive, chansim::ChannelKind ch, double rician_a = 0.0) {
    UserSpec u;
    u.task.task_id = std::move(id);
    u.task.kind = kind;
    u.task.n_label = n_label;
    u.task.positive = std::move(positive);
    u.channel.kind = ch;
    u.channel.rician_a = rician_a;
    u.channel.snr_db = 7.0;
    u.channel.equalize = true;
    return u;
}

std::vector<double> make_grid(double lo, double hi, double step) {
    std::vector<double> g;
    for (double x = lo; x <= hi + 1e-9; x += step) g.push_back(x);
    return g;
}

}  // namespace

ExperimentConfig expand_preset(const std::string& name) {
    using Kind = data::TaskSpec::Kind;
    using Ch = chansim::ChannelKind;
    ExperimentConfig cfg;
    cfg.preset = name;

    if (name == "case1") {
        // image recovery over AWGN + 10-class classification over Rayleigh,
        // plain end-to-end training (deterministic latents, no rate term)
        cfg.users.push_back(make_user("recovery", Kind::recover, 0, {}, Ch::awgn));
        cfg.users.push_back(make_user("classify10", Kind::classify, 10, {}, Ch::rayleigh));
        cfg.loss.task_w = {1.0, 1e-3};
        cfg.loss.beta = 0.0;
        cfg.loss.gamma = {0.5, 0.5};
        cfg.train.stochastic = false;
        cfg.eval_grid = make_grid(-5, 19, 2);
        cfg.compare_variants = {"deepbroadcast", "deeprc"};
    } else if (name == "case2" || name == "case4" || name == "custom") {
        // two binary tasks: animals over Rayleigh, small ground entities over AWGN
        cfg.users.push_back(
            make_user("task1", Kind::classify, 2, data::default_animal_classes(), Ch::rayleigh));
        cfg.users.push_back(make_user("task2", Kind::classify, 2,
                                      data::default_small_ground_classes(), Ch::awgn));
        cfg.loss.task_w = {0.5, 0.5};
        cfg.loss.beta = 2e-4;  // beta * gamma_i = 1e-4
        cfg.loss.gamma = {0.5, 0.5};
        cfg.eval_grid = name == "case4" ? make_grid(-5, 19, 2) : make_grid(-5, 31, 2);
        cfg.compare_variants = name == "case4"
                                   ? std::vector<std::string>{"mtoc", "mtoc_wlca", "mtoc_wgcf",
                                                              "deepbroadcast"}
                                   : std::vector<std::string>{"deepbroadcast", "mtoc", "unicast"};
    } else if (name == "case3" || name == "case5") {
        // three users over AWGN / Rayleigh / Rician(a=2); the 10-class task
        // carries the dominant weight
        cfg.users.push_back(
            make_user("task1", Kind::classify, 2, data::default_animal_classes(), Ch::awgn));
        cfg.users.push_back(make_user("task2", Kind::classify, 2,
                                      data::default_small_ground_classes(), Ch::rayleigh));
        cfg.users.push_back(make_user("task3", Kind::classify, 10, {}, Ch::rician, 2.0));
        cfg.loss.task_w = {0.15, 0.15, 0.7};
        cfg.loss.beta = 3e-4;  // beta * gamma_i = 1e-4
        cfg.loss.gamma = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        cfg.eval_grid = make_grid(-5, 19, 2);
        cfg.compare_variants =
            name == "case5" ? std::vector<std::string>{"deepbroadcast", "deepbroadcast_e2e"}
                            : std::vector<std::string>{"deepbroadcast", "mtoc", "unicast"};
    } else {
        throw config_error("unknown preset: " + name +
                           " (expected case1|case2|case3|case4|case5|custom)");
    }
    cfg.finalize();
    return cfg;
}

}  // namespace deepbroadcast::config
