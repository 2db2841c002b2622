#include "covq/cli.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "covq/mapgen.hpp"
#include "covq/oracle.hpp"

namespace covq {
namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("short write to '" + path + "'");
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex_hash(uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument(v);
}

double parse_real(const std::string& v) {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
}

int64_t parse_int(const std::string& v) {
    size_t used = 0;
    const int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value,
                     int line) {
    try {
        if (key == "episodes") cfg.episodes = static_cast<int>(parse_int(value));
        else if (key == "report_episodes") cfg.report_episodes = static_cast<int>(parse_int(value));
        else if (key == "gamma") cfg.gamma = parse_real(value);
        else if (key == "lr") cfg.lr = parse_real(value);
        else if (key == "target_sync") cfg.target_sync = static_cast<int>(parse_int(value));
        else if (key == "eps_start") cfg.eps_start = parse_real(value);
        else if (key == "eps_end") cfg.eps_end = parse_real(value);
        else if (key == "eps_decay") cfg.eps_decay = parse_real(value);
        else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(value));
        else if (key == "buffer_capacity") cfg.buffer_capacity = static_cast<int>(parse_int(value));
        else if (key == "warmup") cfg.warmup = static_cast<int>(parse_int(value));
        else if (key == "per_alpha") cfg.per_alpha = parse_real(value);
        else if (key == "per_beta_start") cfg.per_beta_start = parse_real(value);
        else if (key == "per_beta_end") cfg.per_beta_end = parse_real(value);
        else if (key == "priority_floor") cfg.priority_floor = parse_real(value);
        else if (key == "update_per_episode") cfg.update_per_episode = parse_bool(value);
        else if (key == "update_every") cfg.update_every = static_cast<int>(parse_int(value));
        else if (key == "burn_in_len") cfg.burn_in_len = static_cast<int>(parse_int(value));
        else if (key == "budget") cfg.budget_spec = value;
        else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(value));
        else if (key == "hidden") cfg.hidden = static_cast<int>(parse_int(value));
        else if (key == "checkpoint_every") cfg.checkpoint_every = static_cast<int>(parse_int(value));
        else if (key == "variant") {
            const auto v = variant_from_name(value);
            if (!v) throw std::invalid_argument(value);
            cfg.variant = *v;
        } else {
            throw ConfigError("unknown config key '" + key + "'", line);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad value '" + value + "' for key '" + key + "'", line);
    }
}

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value", line_no);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty key or value", line_no);
        }
        try {
            apply_config_kv(cfg, key, value, line_no);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    return parse_train_config(read_text_file(path));
}

std::map<std::string, std::string> config_to_kv(const TrainConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["episodes"] = std::to_string(cfg.episodes);
    kv["report_episodes"] = std::to_string(cfg.report_episodes);
    kv["gamma"] = format_real(cfg.gamma);
    kv["lr"] = format_real(cfg.lr);
    kv["target_sync"] = std::to_string(cfg.target_sync);
    kv["eps_start"] = format_real(cfg.eps_start);
    kv["eps_end"] = format_real(cfg.eps_end);
    kv["eps_decay"] = format_real(cfg.eps_decay);
    kv["batch_size"] = std::to_string(cfg.batch_size);
    kv["buffer_capacity"] = std::to_string(cfg.buffer_capacity);
    kv["warmup"] = std::to_string(cfg.warmup);
    kv["per_alpha"] = format_real(cfg.per_alpha);
    kv["per_beta_start"] = format_real(cfg.per_beta_start);
    kv["per_beta_end"] = format_real(cfg.per_beta_end);
    kv["priority_floor"] = format_real(cfg.priority_floor);
    kv["update_per_episode"] = cfg.update_per_episode ? "true" : "false";
    kv["update_every"] = std::to_string(cfg.update_every);
    kv["burn_in_len"] = std::to_string(cfg.burn_in_len);
    kv["budget"] = cfg.budget_spec;
    kv["seed"] = std::to_string(cfg.seed);
    kv["variant"] = variant_name(cfg.variant);
    kv["hidden"] = std::to_string(cfg.hidden);
    kv["checkpoint_every"] = std::to_string(cfg.checkpoint_every);
    return kv;
}

std::string metrics_csv_header() { return "episode,steps,coverage_pct,violations,reward,epsilon,is_best\n"; }

std::string metrics_csv_row(const EpisodeRecord& rec) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%d,%.6f,%.6f,%d\n", rec.index, rec.steps,
                  rec.coverage_pct, rec.violations, rec.total_reward, rec.epsilon,
                  rec.is_best ? 1 : 0);
    return buf;
}

std::vector<EpisodeRecord> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics CSV '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "episode,steps,coverage_pct,violations,reward,epsilon,is_best") {
        throw IoError("'" + path + "' does not look like a covq metrics CSV");
    }
    std::vector<EpisodeRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpisodeRecord rec;
        int best = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%d,%lf,%lf,%d", &rec.index, &rec.steps,
                        &rec.coverage_pct, &rec.violations, &rec.total_reward, &rec.epsilon,
                        &best) != 7) {
            throw IoError("malformed CSV row in '" + path + "': " + line);
        }
        rec.is_best = best != 0;
        out.push_back(rec);
    }
    return out;
}

RunSummary summarize(const std::vector<EpisodeRecord>& log, int report_episodes) {
    RunSummary s;
    s.episodes = static_cast<int>(log.size());
    s.window = std::min<int>(s.episodes, report_episodes);
    for (int i = 0; i < s.window; ++i) {
        const EpisodeRecord& r = log[static_cast<size_t>(i)];
        const bool full = r.coverage_pct >= 100.0 - 1e-9;
        if (full) ++s.full_coverage;
        if (r.violations == 0) ++s.zero_violation;
        if (r.is_best) {
            ++s.best;
            if (!s.max_best_reward || r.total_reward > *s.max_best_reward) {
                s.max_best_reward = r.total_reward;
            }
        }
    }
    return s;
}

int cmd_mapgen(const MapgenOptions& opts) {
    if (opts.out_path.empty()) throw ConfigError("mapgen needs an output path");
    MapGenConfig cfg;
    cfg.n = opts.n;
    cfg.stations = opts.stations;
    cfg.obstacle_density = opts.density;
    cfg.seed = opts.seed;
    cfg.validation_budget = opts.validation_budget;
    const GridMap map = generate_map(cfg);
    write_text_file(opts.out_path, map.render());
    std::cout << "wrote " << opts.out_path << " (" << map.rows() << "x" << map.cols() << ", "
              << map.charging_count() << " stations, " << map.obstacle_count()
              << " obstacles, hash " << hex_hash(map.text_hash()) << ")\n";
    return 0;
}

namespace {

json summary_json(const RunSummary& s) {
    json j = {
        {"episodes", s.episodes},
        {"report_window", s.window},
        {"full_coverage_episodes", s.full_coverage},
        {"zero_violation_episodes", s.zero_violation},
        {"best_episodes", s.best},
    };
    if (s.max_best_reward) {
        j["max_best_reward"] = *s.max_best_reward;
    } else {
        j["max_best_reward"] = nullptr;
    }
    return j;
}

}  // namespace

int cmd_train(const TrainOptions& opts) {
    if (opts.out_dir.empty()) throw ConfigError("train needs --out");

    TrainConfig cfg;
    std::string map_path = opts.map_path;
    if (!opts.from_manifest.empty()) {
        const json m = json::parse(read_text_file(opts.from_manifest));
        for (const auto& [key, value] : m.at("config").items()) {
            apply_config_kv(cfg, key, value.get<std::string>());
        }
        if (map_path.empty()) map_path = m.at("map_path").get<std::string>();
    } else if (!opts.config_path.empty()) {
        cfg = load_train_config(opts.config_path);
    }
    if (map_path.empty()) throw ConfigError("train needs --map (or a manifest that names one)");

    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.episodes) cfg.episodes = *opts.episodes;
    if (opts.budget) cfg.budget_spec = *opts.budget;
    if (opts.variant) {
        const auto v = variant_from_name(*opts.variant);
        if (!v) throw ConfigError("unknown variant '" + *opts.variant + "'");
        cfg.variant = *v;
    }

    const GridMap map = GridMap::parse(read_text_file(map_path));
    const int budget = cfg.resolve_budget(map);
    Env env(map, budget);

    fs::create_directories(opts.out_dir);
    const std::string csv_path = (fs::path(opts.out_dir) / "metrics.csv").string();
    const std::string manifest_path = (fs::path(opts.out_dir) / "manifest.json").string();
    const std::string best_path = (fs::path(opts.out_dir) / "best_solution.json").string();
    const std::string ckpt_path = (fs::path(opts.out_dir) / "checkpoint_final.cbqn").string();

    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot write '" + csv_path + "'");
    csv << metrics_csv_header();

    const std::string started = utc_timestamp();
    Trainer trainer(env, cfg);
    int episodes_done = 0;
    TrainResult result = trainer.run(
        [&](const EpisodeRecord& rec) {
            csv << metrics_csv_row(rec);
            ++episodes_done;
            if (!opts.quiet && (episodes_done % 500 == 0)) {
                std::cerr << "episode " << rec.index << ": coverage " << rec.coverage_pct
                          << "%, violations " << rec.violations << ", reward "
                          << rec.total_reward << "\n";
            }
        },
        [&](int episode, QNetwork<Scalar>& net) {
            const std::string path =
                (fs::path(opts.out_dir) / ("checkpoint_ep" + std::to_string(episode + 1) + ".cbqn"))
                    .string();
            save_checkpoint(path, net, budget);
        });
    csv.close();
    if (!csv) throw IoError("short write to '" + csv_path + "'");

    save_checkpoint(ckpt_path, trainer.policy(), budget);

    if (result.best) {
        // A recorded best path must replay exactly; anything else means the
        // environment drifted mid-run.
        const PathReplay check = replay_path(env, result.best->path);
        if (!check.full_coverage || check.violations != 0 ||
            check.total_reward != result.best->reward) {
            throw Error("best-solution path failed verification replay");
        }
        json best = {
            {"map_hash", hex_hash(map.text_hash())},
            {"budget", budget},
            {"episode", result.best->episode},
            {"reward", result.best->reward},
            {"path", json::array()},
        };
        for (const Coord& c : result.best->path) best["path"].push_back({c.row, c.col});
        write_text_file(best_path, best.dump(2) + "\n");
    }

    const RunSummary summary = summarize(result.log, cfg.report_episodes);
    json manifest = {
        {"config", config_to_kv(cfg)},
        {"map_path", map_path},
        {"map_hash", hex_hash(map.text_hash())},
        {"budget", budget},
        {"seed", cfg.seed},
        {"started_utc", started},
        {"finished_utc", utc_timestamp()},
        {"artifacts",
         {{"metrics_csv", csv_path},
          {"checkpoint", ckpt_path},
          {"best_solution", result.best ? json(best_path) : json(nullptr)}}},
        {"summary", summary_json(summary)},
    };
    write_text_file(manifest_path, manifest.dump(2) + "\n");

    if (!opts.quiet) {
        std::cout << "trained " << summary.episodes << " episodes (tallies over first "
                  << summary.window << "): full-coverage " << summary.full_coverage
                  << ", zero-violation " << summary.zero_violation << ", best " << summary.best
                  << ", max best reward "
                  << (summary.max_best_reward ? format_real(*summary.max_best_reward) : "NA")
                  << "\n"
                  << "manifest: " << manifest_path << "\n";
    }
    return 0;
}

int cmd_eval(const EvalOptions& opts) {
    auto [net, meta] = load_checkpoint_network(opts.checkpoint_path);
    if (opts.variant) {
        const auto v = variant_from_name(*opts.variant);
        if (!v) throw ConfigError("unknown variant '" + *opts.variant + "'");
        if (*v != meta.variant) {
            throw VariantMismatchError("checkpoint variant is '" +
                                       std::string(variant_name(meta.variant)) +
                                       "', requested '" + *opts.variant + "'");
        }
    }
    const GridMap map = GridMap::parse(read_text_file(opts.map_path));
    int budget = meta.budget_cap;
    if (opts.budget) {
        TrainConfig tmp;
        tmp.budget_spec = *opts.budget;
        budget = tmp.resolve_budget(map);
    }
    Env env(map, budget);
    const EvalResult result = evaluate(net, env);

    json out = {
        {"map_hash", hex_hash(map.text_hash())},
        {"budget", budget},
        {"steps", result.record.steps},
        {"coverage_pct", result.record.coverage_pct},
        {"violations", result.record.violations},
        {"reward", result.record.total_reward},
        {"is_best", result.record.is_best},
        {"path", json::array()},
    };
    for (const Coord& c : result.path) out["path"].push_back({c.row, c.col});
    if (!opts.out_path.empty()) write_text_file(opts.out_path, out.dump(2) + "\n");

    std::cout << "steps " << result.record.steps << ", coverage " << result.record.coverage_pct
              << "%, violations " << result.record.violations << ", reward "
              << format_real(result.record.total_reward)
              << (result.record.is_best ? " (full coverage, no violations)" : "") << "\n";
    return 0;
}

namespace {

struct ManifestView {
    std::string label;
    RunSummary summary;
};

ManifestView load_manifest_summary(const std::string& path) {
    const json m = json::parse(read_text_file(path));
    int report = 7000;
    if (m.contains("config") && m["config"].contains("report_episodes")) {
        report = static_cast<int>(parse_int(m["config"]["report_episodes"].get<std::string>()));
    }
    const std::string csv = m.at("artifacts").at("metrics_csv").get<std::string>();
    std::string csv_path = csv;
    if (!fs::path(csv).is_absolute() && !fs::exists(csv_path)) {
        csv_path = (fs::path(path).parent_path() / fs::path(csv).filename()).string();
    }
    ManifestView view;
    view.label = path;
    view.summary = summarize(read_metrics_csv(csv_path), report);
    return view;
}

}  // namespace

int cmd_compare(const CompareOptions& opts) {
    const ManifestView a = load_manifest_summary(opts.manifest_a);
    const ManifestView b = load_manifest_summary(opts.manifest_b);

    auto reward_cell = [](const RunSummary& s) {
        return s.max_best_reward ? format_real(*s.max_best_reward) : std::string("NA");
    };
    std::printf("%-28s %16s %16s\n", "metric", "A", "B");
    std::printf("%-28s %16d %16d\n", "full_coverage_episodes", a.summary.full_coverage,
                b.summary.full_coverage);
    std::printf("%-28s %16d %16d\n", "zero_violation_episodes", a.summary.zero_violation,
                b.summary.zero_violation);
    std::printf("%-28s %16d %16d\n", "best_episodes", a.summary.best, b.summary.best);
    std::printf("%-28s %16s %16s\n", "max_best_reward", reward_cell(a.summary).c_str(),
                reward_cell(b.summary).c_str());
    std::printf("(A: %s over first %d episodes; B: %s over first %d episodes)\n",
                a.label.c_str(), a.summary.window, b.label.c_str(), b.summary.window);
    return 0;
}

}  // namespace cli
}  // namespace covq
