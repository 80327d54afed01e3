#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "revgn/cli.hpp"

namespace revgn::cli {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: bad boolean for " + key + ": " + v);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " +
                                     std::to_string(line_no));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config: empty key at line " +
                                                  std::to_string(line_no));
        kv[key] = value;
    }

    auto get_size = [&](const std::string& k, std::size_t def) {
        auto it = kv.find(k);
        return it == kv.end() ? def : static_cast<std::size_t>(std::stoull(it->second));
    };
    auto get_u64 = [&](const std::string& k, std::uint64_t def) {
        auto it = kv.find(k);
        return it == kv.end() ? def : std::stoull(it->second);
    };
    auto get_double = [&](const std::string& k, double def) {
        auto it = kv.find(k);
        return it == kv.end() ? def : std::stod(it->second);
    };
    auto get_string = [&](const std::string& k, const std::string& def) {
        auto it = kv.find(k);
        return it == kv.end() ? def : it->second;
    };
    auto get_flag = [&](const std::string& k, bool def) {
        auto it = kv.find(k);
        return it == kv.end() ? def : parse_bool(it->second, k);
    };

    cfg.dataset = get_string("dataset.name", cfg.dataset);
    cfg.dataset_path = get_string("dataset.path", cfg.dataset_path);
    cfg.subset = get_size("dataset.subset", cfg.subset);
    cfg.augment = get_flag("dataset.augment", cfg.augment);
    if (kv.count("dataset.uci_targets"))
        for (const auto& t : split(kv["dataset.uci_targets"], ','))
            cfg.uci_targets.push_back(std::stoull(t));
    cfg.synthetic_d = get_size("dataset.synthetic_d", cfg.synthetic_d);
    cfg.synthetic_n = get_size("dataset.synthetic_n", cfg.synthetic_n);
    cfg.synthetic_d_y = get_size("dataset.synthetic_d_y", cfg.synthetic_d_y);
    cfg.synthetic_seed = get_u64("dataset.synthetic_seed", cfg.synthetic_seed);
    cfg.synthetic_noise = get_double("dataset.synthetic_noise", cfg.synthetic_noise);

    cfg.d_prime = get_size("model.d_prime", cfg.d_prime);
    cfg.blocks = get_size("model.blocks", cfg.blocks);
    cfg.d_y = get_size("model.d_y", cfg.d_y);
    cfg.init = get_string("model.init", cfg.init);
    cfg.init_sigma = get_double("model.init_sigma", cfg.init_sigma);
    cfg.no_bottleneck = get_flag("model.no_bottleneck", cfg.no_bottleneck);

    cfg.optimizer = get_string("optim.kind", cfg.optimizer);
    if (kv.count("optim.switch")) {
        for (const auto& part : split(kv["optim.switch"], ',')) {
            std::size_t colon = part.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("config: optim.switch entries are epoch:kind");
            SchedulePoint p;
            p.epoch = std::stoull(trim(part.substr(0, colon)));
            p.optimizer = trim(part.substr(colon + 1));
            cfg.schedule.push_back(p);
        }
    }
    cfg.gn.lr = get_double("optim.gn.lr", cfg.gn.lr);
    cfg.gn.weight_decay = get_double("optim.gn.weight_decay", cfg.gn.weight_decay);
    {
        std::string kind = get_string("optim.gn.pinv", "truncate");
        double rtol = get_double("optim.gn.pinv_rtol", 0.01);
        double atol = get_double("optim.gn.pinv_atol", 1e-5);
        double frac = get_double("optim.gn.pinv_frac", 0.1);
        cfg.pinv_noise_seed = get_u64("optim.gn.pinv_seed", 0);
        if (kind == "truncate")
            cfg.gn.pinv = PinvPolicy::truncate(rtol, atol);
        else if (kind == "damp")
            cfg.gn.pinv = PinvPolicy::damp(frac);
        else if (kind == "noise")
            cfg.gn.pinv = PinvPolicy::noise(frac, cfg.pinv_noise_seed);
        else
            throw std::runtime_error("config: unknown pinv policy " + kind);
    }
    cfg.sgd.lr = get_double("optim.sgd.lr", cfg.sgd.lr);
    cfg.sgd.weight_decay = get_double("optim.sgd.weight_decay", cfg.sgd.weight_decay);
    cfg.adam.lr = get_double("optim.adam.lr", cfg.adam.lr);
    cfg.adam.beta1 = get_double("optim.adam.beta1", cfg.adam.beta1);
    cfg.adam.beta2 = get_double("optim.adam.beta2", cfg.adam.beta2);
    cfg.adam.eps_hat = get_double("optim.adam.eps_hat", cfg.adam.eps_hat);
    cfg.adam.weight_decay = get_double("optim.adam.weight_decay", cfg.adam.weight_decay);

    cfg.regime = get_string("regime", cfg.regime);
    cfg.batch = get_size("regime.batch", cfg.batch);
    cfg.epochs = get_size("epochs", cfg.epochs);
    if (kv.count("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : split(kv["seeds"], ','))
            cfg.seeds.push_back(static_cast<std::uint32_t>(std::stoul(s)));
    }
    cfg.loss = get_string("loss", cfg.loss);

    cfg.probe = get_size("analysis.probe", cfg.probe);
    cfg.probe_seed = get_u64("analysis.probe_seed", cfg.probe_seed);
    cfg.ntk = get_flag("analysis.ntk", cfg.ntk);
    cfg.cka = get_flag("analysis.cka", cfg.cka);
    cfg.metric_cadence = get_size("analysis.cadence", cfg.metric_cadence);
    cfg.checkpoint_cadence = get_size("checkpoint.cadence", cfg.checkpoint_cadence);

    cfg.output_dir = get_string("run.output_dir", cfg.output_dir);
    cfg.run_id = get_string("run.id", cfg.run_id);

    if (cfg.seeds.empty()) throw std::runtime_error("config: seeds must be non-empty");
    if (cfg.regime != "full_batch" && cfg.regime != "minibatch")
        throw std::runtime_error("config: regime must be full_batch or minibatch");
    if (cfg.regime == "minibatch" && cfg.batch == 0)
        throw std::runtime_error("config: minibatch regime needs regime.batch");
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream o;
    o.precision(17);
    o << "dataset.name = " << cfg.dataset << "\n";
    o << "dataset.path = " << cfg.dataset_path << "\n";
    o << "dataset.subset = " << cfg.subset << "\n";
    o << "dataset.augment = " << (cfg.augment ? 1 : 0) << "\n";
    if (!cfg.uci_targets.empty()) {
        o << "dataset.uci_targets = ";
        for (std::size_t i = 0; i < cfg.uci_targets.size(); ++i)
            o << (i ? "," : "") << cfg.uci_targets[i];
        o << "\n";
    }
    if (cfg.dataset == "synthetic") {
        o << "dataset.synthetic_d = " << cfg.synthetic_d << "\n";
        o << "dataset.synthetic_n = " << cfg.synthetic_n << "\n";
        o << "dataset.synthetic_d_y = " << cfg.synthetic_d_y << "\n";
        o << "dataset.synthetic_seed = " << cfg.synthetic_seed << "\n";
        o << "dataset.synthetic_noise = " << cfg.synthetic_noise << "\n";
    }
    o << "model.d_prime = " << cfg.d_prime << "\n";
    o << "model.blocks = " << cfg.blocks << "\n";
    o << "model.d_y = " << cfg.d_y << "\n";
    o << "model.init = " << cfg.init << "\n";
    o << "model.init_sigma = " << cfg.init_sigma << "\n";
    o << "model.no_bottleneck = " << (cfg.no_bottleneck ? 1 : 0) << "\n";
    o << "optim.kind = " << cfg.optimizer << "\n";
    if (!cfg.schedule.empty()) {
        o << "optim.switch = ";
        for (std::size_t i = 0; i < cfg.schedule.size(); ++i)
            o << (i ? "," : "") << cfg.schedule[i].epoch << ":" << cfg.schedule[i].optimizer;
        o << "\n";
    }
    o << "optim.gn.lr = " << cfg.gn.lr << "\n";
    o << "optim.gn.weight_decay = " << cfg.gn.weight_decay << "\n";
    const char* pinv_name = cfg.gn.pinv.kind == PinvPolicy::Kind::Truncate ? "truncate"
                            : cfg.gn.pinv.kind == PinvPolicy::Kind::Damp  ? "damp"
                                                                          : "noise";
    o << "optim.gn.pinv = " << pinv_name << "\n";
    o << "optim.gn.pinv_rtol = " << cfg.gn.pinv.rtol << "\n";
    o << "optim.gn.pinv_atol = " << cfg.gn.pinv.atol << "\n";
    o << "optim.gn.pinv_frac = " << cfg.gn.pinv.frac << "\n";
    o << "optim.gn.pinv_seed = " << cfg.gn.pinv.seed << "\n";
    o << "optim.sgd.lr = " << cfg.sgd.lr << "\n";
    o << "optim.sgd.weight_decay = " << cfg.sgd.weight_decay << "\n";
    o << "optim.adam.lr = " << cfg.adam.lr << "\n";
    o << "optim.adam.beta1 = " << cfg.adam.beta1 << "\n";
    o << "optim.adam.beta2 = " << cfg.adam.beta2 << "\n";
    o << "optim.adam.eps_hat = " << cfg.adam.eps_hat << "\n";
    o << "optim.adam.weight_decay = " << cfg.adam.weight_decay << "\n";
    o << "regime = " << cfg.regime << "\n";
    o << "regime.batch = " << cfg.batch << "\n";
    o << "epochs = " << cfg.epochs << "\n";
    o << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) o << (i ? "," : "") << cfg.seeds[i];
    o << "\n";
    o << "loss = " << cfg.loss << "\n";
    o << "analysis.probe = " << cfg.probe << "\n";
    o << "analysis.probe_seed = " << cfg.probe_seed << "\n";
    o << "analysis.ntk = " << (cfg.ntk ? 1 : 0) << "\n";
    o << "analysis.cka = " << (cfg.cka ? 1 : 0) << "\n";
    o << "analysis.cadence = " << cfg.metric_cadence << "\n";
    o << "checkpoint.cadence = " << cfg.checkpoint_cadence << "\n";
    o << "run.output_dir = " << cfg.output_dir << "\n";
    o << "run.id = " << cfg.run_id << "\n";
    return o.str();
}

std::string config_hash(const RunConfig& cfg) {
    // FNV-1a over the canonical serialization
    std::string s = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace revgn::cli
