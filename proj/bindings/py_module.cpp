#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <optional>

#include "covq/cli.hpp"
#include "covq/mapgen.hpp"
#include "covq/oracle.hpp"
#include "covq/state_codec.hpp"
#include "covq/trainer.hpp"

namespace py = pybind11;
using namespace covq;

namespace {

py::array_t<float> encode_array(const GridMap& map, const EnvState& state, int budget_cap) {
    const StateTensor<float> enc = encode<float>(map, state, budget_cap);
    py::array_t<float> arr({kStateChannels, map.rows(), map.cols()});
    std::copy(enc.channels.data.begin(), enc.channels.data.end(), arr.mutable_data());
    return arr;
}

std::vector<std::pair<int, int>> path_pairs(const std::vector<Coord>& path) {
    std::vector<std::pair<int, int>> out;
    out.reserve(path.size());
    for (const Coord& c : path) out.emplace_back(c.row, c.col);
    return out;
}

std::vector<Coord> coords_from_pairs(const std::vector<std::pair<int, int>>& pairs) {
    std::vector<Coord> out;
    out.reserve(pairs.size());
    for (const auto& [r, c] : pairs) out.push_back({r, c});
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Recurrent deep Q-learning for energy-constrained grid coverage";

    py::register_exception<MapParseError>(m, "MapParseError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InstanceTooLargeError>(m, "InstanceTooLargeError", PyExc_ValueError);

    py::enum_<Cell>(m, "Cell")
        .value("FREE", Cell::Free)
        .value("OBSTACLE", Cell::Obstacle)
        .value("CHARGING", Cell::Charging);

    py::enum_<Action>(m, "Action")
        .value("UP", Action::Up)
        .value("DOWN", Action::Down)
        .value("LEFT", Action::Left)
        .value("RIGHT", Action::Right);

    py::enum_<Variant>(m, "Variant")
        .value("RECURRENT", Variant::Recurrent)
        .value("CNN", Variant::CnnBaseline);

    py::class_<GridMap>(m, "GridMap")
        .def_static("parse", &GridMap::parse, py::arg("text"))
        .def("render", &GridMap::render)
        .def_property_readonly("rows", &GridMap::rows)
        .def_property_readonly("cols", &GridMap::cols)
        .def_property_readonly("start",
                               [](const GridMap& g) {
                                   return std::make_pair(g.start().row, g.start().col);
                               })
        .def_property_readonly("obstacle_count", &GridMap::obstacle_count)
        .def_property_readonly("charging_count", &GridMap::charging_count)
        .def_property_readonly("text_hash", &GridMap::text_hash)
        .def("cell_at", [](const GridMap& g, int row, int col) { return g.at({row, col}); })
        .def("__eq__", [](const GridMap& a, const GridMap& b) { return a == b; });

    m.def(
        "generate_map",
        [](int n, int stations, double density, uint64_t seed, int validation_budget) {
            MapGenConfig cfg;
            cfg.n = n;
            cfg.stations = stations;
            cfg.obstacle_density = density;
            cfg.seed = seed;
            cfg.validation_budget = validation_budget;
            return generate_map(cfg);
        },
        py::arg("n") = 16, py::arg("stations") = 3, py::arg("density") = 0.1,
        py::arg("seed") = 0, py::arg("validation_budget") = -1);

    m.def(
        "reachable_cells",
        [](const GridMap& map, int budget) {
            std::vector<std::pair<int, int>> out;
            for (Coord c : reachable_cells(map, budget)) out.emplace_back(c.row, c.col);
            return out;
        },
        py::arg("map"), py::arg("budget"),
        "Definition-1 reachable set at the given budget");

    py::class_<EnvState>(m, "EnvState")
        .def_property_readonly(
            "position", [](const EnvState& s) { return std::make_pair(s.position.row, s.position.col); })
        .def_readonly("budget_remaining", &EnvState::budget_remaining)
        .def_readonly("step", &EnvState::step)
        .def_readonly("violations", &EnvState::violations)
        .def_readonly("done", &EnvState::done)
        .def_property_readonly("visited", [](const EnvState& s) { return s.visited; });

    py::class_<StepOutcome>(m, "StepOutcome")
        .def_readonly("reward", &StepOutcome::reward)
        .def_readonly("new_cell_covered", &StepOutcome::new_cell_covered)
        .def_readonly("violated", &StepOutcome::violated)
        .def_readonly("terminal", &StepOutcome::terminal);

    py::class_<Env>(m, "Env")
        .def(py::init<GridMap, int>(), py::arg("map"), py::arg("budget"))
        .def_property_readonly("map", &Env::map)
        .def_property_readonly("budget_cap", &Env::budget_cap)
        .def_property_readonly("episode_cap", &Env::episode_cap)
        .def_property_readonly("target_count", &Env::target_count)
        .def("reset", &Env::reset)
        .def("action_mask", &Env::action_mask)
        .def("step",
             [](const Env& env, const EnvState& s, int action) {
                 return env.step(s, static_cast<Action>(action));
             })
        .def("coverage_fraction", &Env::coverage_fraction)
        .def("encode",
             [](const Env& env, const EnvState& s) {
                 return py::make_tuple(encode_array(env.map(), s, env.budget_cap()),
                                       env.budget_cap() > 0
                                           ? double(s.budget_remaining) / env.budget_cap()
                                           : 0.0);
             },
             "Observation tensor (4,N,N) plus the normalized budget scalar");

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("episodes", &TrainConfig::episodes)
        .def_readwrite("report_episodes", &TrainConfig::report_episodes)
        .def_readwrite("gamma", &TrainConfig::gamma)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("target_sync", &TrainConfig::target_sync)
        .def_readwrite("eps_start", &TrainConfig::eps_start)
        .def_readwrite("eps_end", &TrainConfig::eps_end)
        .def_readwrite("eps_decay", &TrainConfig::eps_decay)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("buffer_capacity", &TrainConfig::buffer_capacity)
        .def_readwrite("warmup", &TrainConfig::warmup)
        .def_readwrite("per_alpha", &TrainConfig::per_alpha)
        .def_readwrite("per_beta_start", &TrainConfig::per_beta_start)
        .def_readwrite("per_beta_end", &TrainConfig::per_beta_end)
        .def_readwrite("update_per_episode", &TrainConfig::update_per_episode)
        .def_readwrite("update_every", &TrainConfig::update_every)
        .def_readwrite("burn_in_len", &TrainConfig::burn_in_len)
        .def_readwrite("budget_spec", &TrainConfig::budget_spec)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("variant", &TrainConfig::variant)
        .def_readwrite("hidden", &TrainConfig::hidden)
        .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every);

    py::class_<EpisodeRecord>(m, "EpisodeRecord")
        .def_readonly("index", &EpisodeRecord::index)
        .def_readonly("steps", &EpisodeRecord::steps)
        .def_readonly("coverage_pct", &EpisodeRecord::coverage_pct)
        .def_readonly("violations", &EpisodeRecord::violations)
        .def_readonly("total_reward", &EpisodeRecord::total_reward)
        .def_readonly("epsilon", &EpisodeRecord::epsilon)
        .def_readonly("is_best", &EpisodeRecord::is_best);

    py::class_<BestSolution>(m, "BestSolution")
        .def_property_readonly("path", [](const BestSolution& b) { return path_pairs(b.path); })
        .def_readonly("reward", &BestSolution::reward)
        .def_readonly("episode", &BestSolution::episode);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("log", &TrainResult::log)
        .def_readonly("best_episodes", &TrainResult::best_episodes)
        .def_readonly("target_sync_count", &TrainResult::target_sync_count)
        .def_property_readonly("best", [](const TrainResult& r) {
            return r.best ? py::cast(*r.best) : py::none().cast<py::object>();
        });

    m.def(
        "train",
        [](const Env& env, const TrainConfig& cfg, const std::string& metrics_csv,
           const std::string& checkpoint) {
            Trainer trainer(env, cfg);
            TrainResult result;
            if (!metrics_csv.empty()) {
                std::ofstream csv(metrics_csv, std::ios::binary | std::ios::trunc);
                if (!csv) throw IoError("cannot write '" + metrics_csv + "'");
                csv << cli::metrics_csv_header();
                result = trainer.run(
                    [&](const EpisodeRecord& rec) { csv << cli::metrics_csv_row(rec); });
            } else {
                result = trainer.run();
            }
            if (!checkpoint.empty()) {
                save_checkpoint(checkpoint, trainer.policy(), env.budget_cap());
            }
            return result;
        },
        py::arg("env"), py::arg("config"), py::arg("metrics_csv") = "",
        py::arg("checkpoint") = "", py::call_guard<py::gil_scoped_release>(),
        "Run the full training loop; optionally stream the metrics CSV and "
        "save the final checkpoint");

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("record", &EvalResult::record)
        .def_property_readonly("path",
                               [](const EvalResult& r) { return path_pairs(r.path); });

    m.def(
        "evaluate_checkpoint",
        [](const std::string& path, const Env& env) {
            auto [net, meta] = load_checkpoint_network(path);
            return evaluate(net, env);
        },
        py::arg("checkpoint"), py::arg("env"),
        "Greedy rollout of a saved policy on an environment");

    py::class_<PathReplay>(m, "PathReplay")
        .def_readonly("steps", &PathReplay::steps)
        .def_readonly("total_reward", &PathReplay::total_reward)
        .def_readonly("violations", &PathReplay::violations)
        .def_readonly("coverage_fraction", &PathReplay::coverage_fraction)
        .def_readonly("full_coverage", &PathReplay::full_coverage);

    m.def(
        "replay_path",
        [](const Env& env, const std::vector<std::pair<int, int>>& path) {
            return replay_path(env, coords_from_pairs(path));
        },
        py::arg("env"), py::arg("path"));

    py::class_<oracle::OracleResult>(m, "OracleResult")
        .def_readonly("feasible", &oracle::OracleResult::feasible)
        .def_readonly("optimal_length", &oracle::OracleResult::optimal_length)
        .def_property_readonly("witness_path", [](const oracle::OracleResult& r) {
            return path_pairs(r.witness_path);
        });

    m.def(
        "verify_reachable",
        [](const GridMap& map, int budget) {
            std::vector<std::pair<int, int>> out;
            for (Coord c : oracle::verify_reachable(map, budget)) out.emplace_back(c.row, c.col);
            return out;
        },
        py::arg("map"), py::arg("budget"));

    m.def("optimal_coverage", &oracle::optimal_coverage, py::arg("env"), py::arg("max_len") = -1);

    m.def("epsilon_at", &epsilon_at, py::arg("episode"), py::arg("config"));
    m.def("moving_average", &moving_average, py::arg("series"), py::arg("window") = 100);

    m.attr("__version__") = "0.1.0";
}
