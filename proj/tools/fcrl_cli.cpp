// fcrl: fair contrastive representation learning experiments.
//
// Subcommands: synth, train, sweep, eval, leakage, frontier, aopac,
// bound-check. Every command writes its primary CSV/JSON artifacts plus a
// manifest.json recording the config snapshot, input hashes, and seed.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fcrl/adult.hpp"
#include "fcrl/dataset.hpp"
#include "fcrl/eval.hpp"
#include "fcrl/frontier.hpp"
#include "fcrl/manifest.hpp"
#include "fcrl/theory.hpp"
#include "fcrl/train.hpp"

namespace fs = std::filesystem;
using namespace fcrl;

namespace {

struct CommonOut {
    std::string out = ".";
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOut& c) {
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Random seed for the whole command")
        ->capture_default_str();
    cmd->set_config("--config", "", "Plain key=value config file; flags override it");
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void finish(RunManifest& man, const CommonOut& c, const WallClock& clock) {
    man.seed = c.seed;
    man.duration_seconds = clock.seconds();
    fs::create_directories(c.out);
    write_manifest(man, join_path(c.out, "manifest.json"));
}

nlohmann::json hash_inputs(const std::vector<std::string>& paths) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& p : paths) j[p] = file_hash(p);
    return j;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    CommonOut common;
    std::string mode = "gaussian_bias";
    std::size_t n = 1000, test_n = 0, p = 6;
    double group_prior = 0.5, rho = 0.0, noise = 1.0;
    double label_rate = 0.5, y_scale = 2.0, c_scale = 2.0;
};

int run_synth(const SynthArgs& a) {
    WallClock clock;
    SynthSpec spec;
    if (a.mode == "gaussian_bias")
        spec.mode = SynthMode::GaussianBias;
    else if (a.mode == "xor")
        spec.mode = SynthMode::Xor;
    else
        throw DomainError("unknown synth mode: " + a.mode);
    spec.n = a.n;
    spec.p = a.p;
    spec.group_prior = a.group_prior;
    spec.rho_yc = a.rho;
    spec.noise = a.noise;
    spec.label_rate = a.label_rate;
    spec.y_scale = a.y_scale;
    spec.c_scale = a.c_scale;
    spec.seed = derive_seed(a.common.seed, 10);
    fs::create_directories(a.common.out);
    const std::string train_path = join_path(a.common.out, "train.csv");
    const std::string test_path = join_path(a.common.out, "test.csv");
    save_csv(generate_synthetic(spec), train_path);
    SynthSpec test_spec = spec;
    test_spec.n = a.test_n == 0 ? a.n : a.test_n;
    test_spec.seed = derive_seed(a.common.seed, 11);
    save_csv(generate_synthetic(test_spec), test_path);

    RunManifest man;
    man.command = "synth";
    man.config = {{"mode", a.mode},         {"n", a.n},
                  {"test_n", test_spec.n},  {"p", a.p},
                  {"group_prior", a.group_prior}, {"rho", a.rho},
                  {"noise", a.noise},       {"label_rate", a.label_rate},
                  {"y_scale", a.y_scale},   {"c_scale", a.c_scale}};
    man.outputs = {train_path, test_path};
    man.dataset_hashes = hash_inputs(man.outputs);
    finish(man, a.common, clock);
    std::cout << "wrote " << train_path << " and " << test_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train / sweep

struct TrainArgs {
    CommonOut common;
    std::string data;
    std::string objective = "O2";
    std::string resume;
    TrainConfig cfg;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--data", a.data, "Training CSV")->required();
    cmd->add_option("--beta", a.cfg.beta)->capture_default_str();
    cmd->add_option("--lambda", a.cfg.lambda)->capture_default_str();
    cmd->add_option("--epochs", a.cfg.epochs)->capture_default_str();
    cmd->add_option("--batch-size", a.cfg.batch_size)->capture_default_str();
    cmd->add_option("--lr", a.cfg.learning_rate)->capture_default_str();
    cmd->add_option("--d", a.cfg.d, "Representation dimension")->capture_default_str();
    cmd->add_option("--hidden", a.cfg.hidden)->capture_default_str();
    cmd->add_option("--pred-hidden", a.cfg.pred_hidden)->capture_default_str();
    cmd->add_option("--objective", a.objective, "O1 or O2")->capture_default_str();
}

nlohmann::json train_config_json(const TrainArgs& a) {
    return {{"data", a.data},
            {"beta", a.cfg.beta},
            {"lambda", a.cfg.lambda},
            {"epochs", a.cfg.epochs},
            {"batch_size", a.cfg.batch_size},
            {"lr", a.cfg.learning_rate},
            {"d", a.cfg.d},
            {"hidden", a.cfg.hidden},
            {"pred_hidden", a.cfg.pred_hidden},
            {"objective", a.objective}};
}

int run_train(TrainArgs& a) {
    WallClock clock;
    a.cfg.seed = a.common.seed;
    a.cfg.objective = objective_from_string(a.objective);
    const Dataset ds = load_csv(a.data);
    TrainResult res;
    if (a.resume.empty()) {
        res = train(ds, a.cfg);
    } else {
        res.state = load_checkpoint(a.resume);
        res.trace = run_epochs(res.state, ds, a.cfg, a.cfg.epochs);
    }
    fs::create_directories(a.common.out);
    const std::string ckpt = join_path(a.common.out, "checkpoint.json");
    const std::string trace = join_path(a.common.out, "trace.csv");
    save_checkpoint(res.state, ckpt, a.cfg.beta);
    write_trace_csv(res.trace, trace);

    RunManifest man;
    man.command = "train";
    man.config = train_config_json(a);
    man.config["resume"] = a.resume;
    man.dataset_hashes = hash_inputs({a.data});
    man.outputs = {ckpt, trace};
    finish(man, a.common, clock);
    std::cout << "trained " << res.trace.size() << " epochs; final total "
              << res.trace.back().total << "\n";
    return 0;
}

struct SweepArgs {
    TrainArgs train_args;
    bool warm_start = false;
    std::size_t finetune_epochs = 20;
    std::size_t grid_points = 30;
    std::string beta_grid;  // optional comma-separated override
    std::size_t jobs = 1;
};

std::vector<double> resolve_grid(const SweepArgs& a) {
    if (!a.beta_grid.empty()) {
        std::vector<double> grid;
        std::stringstream ss(a.beta_grid);
        std::string tok;
        while (std::getline(ss, tok, ','))
            grid.push_back(detail::parse_double(tok, 0, grid.size()));
        return grid;
    }
    const auto full = default_beta_grid();
    if (a.grid_points < 1 || a.grid_points > full.size())
        throw DomainError("grid-points must lie in [1, " + std::to_string(full.size()) + "]");
    if (a.grid_points == full.size()) return full;
    std::vector<double> grid;
    for (std::size_t i = 0; i < a.grid_points; ++i) {
        const std::size_t idx =
            a.grid_points == 1 ? 0
                               : i * (full.size() - 1) / (a.grid_points - 1);
        grid.push_back(full[idx]);
    }
    return grid;
}

int run_sweep(SweepArgs& a) {
    WallClock clock;
    TrainArgs& t = a.train_args;
    t.cfg.seed = t.common.seed;
    t.cfg.objective = objective_from_string(t.objective);
    const Dataset ds = load_csv(t.data);
    SweepConfig sc;
    sc.beta_grid = resolve_grid(a);
    sc.warm_start = a.warm_start;
    sc.finetune_epochs = a.finetune_epochs;
    sc.validate();

    std::vector<SweepEntry> entries(sc.beta_grid.size());
    std::size_t total_epochs = 0;
    if (sc.warm_start || a.jobs <= 1) {
        SweepResult res = sweep(ds, t.cfg, sc);
        entries = std::move(res.entries);
        total_epochs = res.total_epochs;
    } else {
        // cold runs are independent; spread them over worker threads
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < sc.beta_grid.size();
                 i = next.fetch_add(1)) {
                TrainConfig cfg = t.cfg;
                cfg.beta = sc.beta_grid[i];
                TrainResult r = train(ds, cfg);
                entries[i].beta = cfg.beta;
                entries[i].state = std::move(r.state);
                entries[i].trace = std::move(r.trace);
                entries[i].epochs_executed = cfg.epochs;
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(a.jobs, sc.beta_grid.size()); ++w)
            pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        total_epochs = t.cfg.epochs * sc.beta_grid.size();
    }

    fs::create_directories(t.common.out);
    RunManifest man;
    man.command = "sweep";
    std::ofstream index(join_path(t.common.out, "sweep.csv"), std::ios::binary);
    index << "index,beta,checkpoint,epochs\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        char tag[16];
        std::snprintf(tag, sizeof(tag), "%03zu", i);
        const std::string ckpt = join_path(t.common.out, std::string("checkpoint_") + tag + ".json");
        const std::string trace = join_path(t.common.out, std::string("trace_") + tag + ".csv");
        save_checkpoint(entries[i].state, ckpt, entries[i].beta);
        write_trace_csv(entries[i].trace, trace);
        index << i << "," << detail::format_double(entries[i].beta) << "," << ckpt << ","
              << entries[i].epochs_executed << "\n";
        man.outputs.push_back(ckpt);
        man.outputs.push_back(trace);
    }
    man.outputs.push_back(join_path(t.common.out, "sweep.csv"));

    man.config = train_config_json(t);
    man.config["warm_start"] = sc.warm_start;
    man.config["finetune_epochs"] = sc.finetune_epochs;
    man.config["beta_grid"] = sc.beta_grid;
    man.config["jobs"] = a.jobs;
    man.config["total_epochs"] = total_epochs;
    man.dataset_hashes = hash_inputs({t.data});
    finish(man, t.common, clock);
    std::cout << "sweep over " << entries.size() << " beta values, " << total_epochs
              << " epochs total\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval / leakage

struct EvalArgs {
    CommonOut common;
    std::string train_data, test_data;
    std::vector<std::string> checkpoints;
    bool raw_features = false;
    std::string probe = "both";       // logreg | mlp1 | both
    std::string target = "y";         // y | c
    std::string preprocess = "standard_scale";  // standard_scale | none | both
    std::size_t seeds = 5;
    std::size_t max_epochs = 1000;
    std::size_t patience = 10;
};

void add_eval_flags(CLI::App* cmd, EvalArgs& a, bool with_target) {
    cmd->add_option("--train-data", a.train_data)->required();
    cmd->add_option("--test-data", a.test_data)->required();
    cmd->add_option("--checkpoint", a.checkpoints, "Checkpoint file(s)");
    cmd->add_option("--probe", a.probe, "logreg, mlp1, or both")->capture_default_str();
    cmd->add_option("--seeds", a.seeds)->capture_default_str();
    cmd->add_option("--max-epochs", a.max_epochs)->capture_default_str();
    cmd->add_option("--patience", a.patience)->capture_default_str();
    if (with_target) {
        cmd->add_flag("--raw-features", a.raw_features,
                      "Probe the raw features instead of a checkpoint");
        cmd->add_option("--target", a.target, "y or c")->capture_default_str();
        cmd->add_option("--preprocess", a.preprocess, "standard_scale, none, or both")
            ->capture_default_str();
    }
}

std::vector<ProbeKind> resolve_probes(const std::string& probe) {
    if (probe == "logreg") return {ProbeKind::LogReg};
    if (probe == "mlp1") return {ProbeKind::Mlp1};
    if (probe == "both") return {ProbeKind::LogReg, ProbeKind::Mlp1};
    throw DomainError("unknown probe: " + probe);
}

std::vector<Preprocess> resolve_preprocess(const std::string& pp) {
    if (pp == "standard_scale") return {Preprocess::StandardScale};
    if (pp == "none") return {Preprocess::None};
    if (pp == "both") return {Preprocess::None, Preprocess::StandardScale};
    throw DomainError("unknown preprocess: " + pp);
}

int run_eval(const EvalArgs& a) {
    WallClock clock;
    if (a.checkpoints.empty() && !a.raw_features)
        throw DomainError("eval needs --checkpoint or --raw-features");
    const Dataset dtr = load_csv(a.train_data);
    const Dataset dte = load_csv(a.test_data);
    const Target target = a.target == "c" ? Target::Group : Target::Label;
    if (a.target != "y" && a.target != "c") throw DomainError("target must be y or c");

    std::vector<std::pair<std::string, EvalResult>> results;
    auto run_one = [&](const std::string& name, const FcrlModel* model) {
        for (ProbeKind kind : resolve_probes(a.probe))
            for (Preprocess pp : resolve_preprocess(a.preprocess)) {
                ProbeSpec spec;
                spec.kind = kind;
                spec.preprocess = pp;
                spec.seeds = a.seeds;
                spec.max_epochs = a.max_epochs;
                spec.patience = a.patience;
                EvalResult r = model ? evaluate(*model, dtr, dte, spec, target, a.common.seed)
                                     : evaluate_raw(dtr, dte, spec, target, a.common.seed);
                results.emplace_back(name, std::move(r));
            }
    };
    if (a.raw_features) run_one("raw_features", nullptr);
    for (const std::string& path : a.checkpoints) {
        const TrainState st = load_checkpoint(path);
        run_one(path, &st.model);
    }

    fs::create_directories(a.common.out);
    const std::string out_csv = join_path(a.common.out, "results.csv");
    write_results_csv(results, out_csv);
    RunManifest man;
    man.command = "eval";
    man.config = {{"train_data", a.train_data}, {"test_data", a.test_data},
                  {"checkpoints", a.checkpoints}, {"raw_features", a.raw_features},
                  {"probe", a.probe},           {"target", a.target},
                  {"preprocess", a.preprocess}, {"seeds", a.seeds},
                  {"max_epochs", a.max_epochs}, {"patience", a.patience}};
    std::vector<std::string> inputs = {a.train_data, a.test_data};
    inputs.insert(inputs.end(), a.checkpoints.begin(), a.checkpoints.end());
    man.dataset_hashes = hash_inputs(inputs);
    man.outputs = {out_csv};
    finish(man, a.common, clock);
    std::cout << "wrote " << out_csv << " (" << results.size() << " eval blocks)\n";
    return 0;
}

int run_leakage(const EvalArgs& a) {
    WallClock clock;
    if (a.checkpoints.empty()) throw DomainError("leakage needs --checkpoint");
    const Dataset dtr = load_csv(a.train_data);
    const Dataset dte = load_csv(a.test_data);
    std::vector<std::pair<std::string, EvalResult>> results;
    double majority = 0.0;
    for (const std::string& path : a.checkpoints) {
        const TrainState st = load_checkpoint(path);
        for (ProbeKind kind : resolve_probes(a.probe)) {
            ProbeSpec spec;
            spec.kind = kind;
            spec.seeds = a.seeds;
            spec.max_epochs = a.max_epochs;
            spec.patience = a.patience;
            const LeakageReport rep = leakage_probe(st.model, dtr, dte, spec, a.common.seed);
            results.emplace_back(path, rep.unscaled);
            results.emplace_back(path, rep.scaled);
            majority = rep.majority_baseline;
        }
    }
    fs::create_directories(a.common.out);
    const std::string out_csv = join_path(a.common.out, "leakage.csv");
    write_results_csv(results, out_csv);
    RunManifest man;
    man.command = "leakage";
    man.config = {{"train_data", a.train_data},
                  {"test_data", a.test_data},
                  {"checkpoints", a.checkpoints},
                  {"probe", a.probe},
                  {"seeds", a.seeds},
                  {"majority_baseline", majority}};
    std::vector<std::string> inputs = {a.train_data, a.test_data};
    inputs.insert(inputs.end(), a.checkpoints.begin(), a.checkpoints.end());
    man.dataset_hashes = hash_inputs(inputs);
    man.outputs = {out_csv};
    finish(man, a.common, clock);
    std::cout << "majority baseline " << majority << "; wrote " << out_csv << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// frontier / aopac / bound-check

std::vector<TradeoffPoint> load_points_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError("empty file: " + path);
    if (detail::split_csv_line(line) != std::vector<std::string>{"beta", "accuracy", "parity"})
        throw DataError(path + ": line 1: expected header beta,accuracy,parity");
    std::vector<TradeoffPoint> points;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 3)
            throw DataError(path + ": line " + std::to_string(row) + ": expected 3 cells");
        TradeoffPoint pt;
        pt.beta = detail::parse_double(cells[0], row, 0);
        pt.accuracy = detail::parse_double(cells[1], row, 1);
        pt.parity = detail::parse_double(cells[2], row, 2);
        pt.tag = "line" + std::to_string(row);
        pt.validate();
        points.push_back(pt);
    }
    return points;
}

// Frontier context derived from the true test labels: data parity,
// majority-accuracy baseline, and the per-group joint table for the LP.
FrontierSpec spec_from_dataset(const Dataset& ds, std::size_t grid_points) {
    FrontierSpec spec;
    spec.grid_points = grid_points;
    spec.delta_data = delta_dp(ds.y, ds.c);
    double y1 = 0.0;
    for (int v : ds.y) y1 += v;
    y1 /= static_cast<double>(ds.n());
    spec.baseline = std::max(y1, 1.0 - y1);
    spec.joint.mass.assign(static_cast<std::size_t>(ds.K), 0.0);
    spec.joint.mass_y1.assign(static_cast<std::size_t>(ds.K), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        spec.joint.mass[static_cast<std::size_t>(ds.c[i])] += 1.0;
        if (ds.y[i] == 1) spec.joint.mass_y1[static_cast<std::size_t>(ds.c[i])] += 1.0;
    }
    for (std::size_t k = 0; k < spec.joint.mass.size(); ++k) {
        spec.joint.mass[k] /= static_cast<double>(ds.n());
        spec.joint.mass_y1[k] /= static_cast<double>(ds.n());
    }
    return spec;
}

struct FrontierArgs {
    CommonOut common;
    std::string points;
    std::string test_data;
    double delta_data = -1.0;  // < 0: derive from test data
    std::size_t grid_points = 200;
};

int run_frontier(const FrontierArgs& a) {
    WallClock clock;
    const auto points = load_points_csv(a.points);
    double delta_data = a.delta_data;
    if (delta_data < 0.0) {
        if (a.test_data.empty())
            throw DomainError("frontier needs --delta-data or --test-data");
        delta_data = delta_dp(load_csv(a.test_data).y, load_csv(a.test_data).c);
    }
    std::vector<TradeoffPoint> front;
    if (points.empty()) {
        std::cerr << "warning: no points in " << a.points << "; empty frontier\n";
    } else {
        front = pareto_front(points, delta_data);
        if (front.empty())
            std::cerr << "warning: every point exceeds the data parity; empty frontier\n";
    }
    fs::create_directories(a.common.out);
    const std::string out_csv = join_path(a.common.out, "pareto.csv");
    std::ofstream f(out_csv, std::ios::binary);
    f << "beta,accuracy,parity\n";
    for (const TradeoffPoint& pt : front)
        f << detail::format_double(pt.beta) << "," << detail::format_double(pt.accuracy) << ","
          << detail::format_double(pt.parity) << "\n";
    RunManifest man;
    man.command = "frontier";
    man.config = {{"points", a.points}, {"delta_data", delta_data}};
    man.dataset_hashes = hash_inputs({a.points});
    man.outputs = {out_csv};
    finish(man, a.common, clock);
    std::cout << front.size() << " Pareto points of " << points.size() << "\n";
    return 0;
}

int run_aopac(const FrontierArgs& a) {
    WallClock clock;
    if (a.test_data.empty()) throw DomainError("aopac needs --test-data for the LP table");
    const auto points = load_points_csv(a.points);
    FrontierSpec spec = spec_from_dataset(load_csv(a.test_data), a.grid_points);
    if (a.delta_data >= 0.0) spec.delta_data = a.delta_data;
    const AopacResult res = aopac(points, spec);
    fs::create_directories(a.common.out);
    const std::string out_json = join_path(a.common.out, "aopac.json");
    {
        std::ofstream f(out_json, std::ios::binary);
        nlohmann::json j = aopac_to_json(res);
        j["delta_data"] = spec.delta_data;
        j["baseline"] = spec.baseline;
        f << j.dump(2) << "\n";
    }
    RunManifest man;
    man.command = "aopac";
    man.config = {{"points", a.points},
                  {"test_data", a.test_data},
                  {"delta_data", spec.delta_data},
                  {"baseline", spec.baseline},
                  {"grid_points", spec.grid_points}};
    man.dataset_hashes = hash_inputs({a.points, a.test_data});
    man.outputs = {out_json};
    finish(man, a.common, clock);
    std::cout << "normalized AOPAC " << res.normalized_area << "\n";
    return 0;
}

struct BoundArgs {
    EvalArgs eval;
    std::size_t passes = 4;
    std::size_t refit_epochs = 30;
};

int run_bound_check(const BoundArgs& a) {
    WallClock clock;
    if (a.eval.checkpoints.empty()) throw DomainError("bound-check needs --checkpoint");
    const Dataset dtr = load_csv(a.eval.train_data);
    const Dataset dte = load_csv(a.eval.test_data);
    std::vector<ProbeSpec> specs;
    for (ProbeKind kind : resolve_probes(a.eval.probe)) {
        ProbeSpec spec;
        spec.kind = kind;
        spec.seeds = a.eval.seeds;
        spec.max_epochs = a.eval.max_epochs;
        spec.patience = a.eval.patience;
        specs.push_back(spec);
    }
    std::vector<BoundRow> rows;
    std::size_t violations = 0;
    for (const std::string& path : a.eval.checkpoints) {
        const TrainState st = load_checkpoint(path);
        const BoundReport rep = bound_check(st.model, dtr, dte, specs, path, a.eval.common.seed,
                                            a.passes, a.refit_epochs);
        for (const BoundRow& row : rep.rows) {
            rows.push_back(row);
            violations += row.flagged;
        }
    }
    fs::create_directories(a.eval.common.out);
    const std::string out_csv = join_path(a.eval.common.out, "bound.csv");
    write_bound_csv(rows, out_csv);
    RunManifest man;
    man.command = "bound-check";
    man.config = {{"train_data", a.eval.train_data}, {"test_data", a.eval.test_data},
                  {"checkpoints", a.eval.checkpoints}, {"probe", a.eval.probe},
                  {"passes", a.passes},               {"refit_epochs", a.refit_epochs},
                  {"violations", violations}};
    std::vector<std::string> inputs = {a.eval.train_data, a.eval.test_data};
    inputs.insert(inputs.end(), a.eval.checkpoints.begin(), a.eval.checkpoints.end());
    man.dataset_hashes = hash_inputs(inputs);
    man.outputs = {out_csv};
    finish(man, a.eval.common, clock);
    std::cout << rows.size() << " bound rows, " << violations << " flagged\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fair contrastive representation learning experiments"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic train/test CSVs");
    add_common(synth_cmd, synth_args.common);
    synth_cmd->add_option("--mode", synth_args.mode, "gaussian_bias or xor")
        ->capture_default_str();
    synth_cmd->add_option("--n", synth_args.n)->capture_default_str();
    synth_cmd->add_option("--test-n", synth_args.test_n, "Test rows (0: same as --n)")
        ->capture_default_str();
    synth_cmd->add_option("--p", synth_args.p)->capture_default_str();
    synth_cmd->add_option("--group-prior", synth_args.group_prior)->capture_default_str();
    synth_cmd->add_option("--rho", synth_args.rho, "Label/group rate gap")->capture_default_str();
    synth_cmd->add_option("--noise", synth_args.noise)->capture_default_str();
    synth_cmd->add_option("--label-rate", synth_args.label_rate)->capture_default_str();
    synth_cmd->add_option("--y-scale", synth_args.y_scale)->capture_default_str();
    synth_cmd->add_option("--c-scale", synth_args.c_scale)->capture_default_str();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train one model");
    add_common(train_cmd, train_args.common);
    add_train_flags(train_cmd, train_args);
    train_cmd->add_option("--resume", train_args.resume, "Continue from a checkpoint");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "Train across a beta grid");
    add_common(sweep_cmd, sweep_args.train_args.common);
    add_train_flags(sweep_cmd, sweep_args.train_args);
    sweep_cmd->add_flag("--warm-start", sweep_args.warm_start,
                        "Finetune from the previous beta instead of retraining");
    sweep_cmd->add_option("--finetune-epochs", sweep_args.finetune_epochs)->capture_default_str();
    sweep_cmd->add_option("--grid-points", sweep_args.grid_points)->capture_default_str();
    sweep_cmd->add_option("--beta-grid", sweep_args.beta_grid,
                          "Comma-separated beta values (overrides --grid-points)");
    sweep_cmd->add_option("--jobs", sweep_args.jobs, "Parallel workers for cold sweeps")
        ->capture_default_str();

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Probe checkpoints downstream");
    add_common(eval_cmd, eval_args.common);
    add_eval_flags(eval_cmd, eval_args, true);

    EvalArgs leak_args;
    auto* leak_cmd = app.add_subcommand("leakage", "Group leakage probe, scaled and unscaled");
    add_common(leak_cmd, leak_args.common);
    add_eval_flags(leak_cmd, leak_args, false);

    FrontierArgs frontier_args;
    auto* frontier_cmd = app.add_subcommand("frontier", "Pareto-filter tradeoff points");
    add_common(frontier_cmd, frontier_args.common);
    frontier_cmd->add_option("--points", frontier_args.points, "CSV beta,accuracy,parity")
        ->required();
    frontier_cmd->add_option("--test-data", frontier_args.test_data);
    frontier_cmd->add_option("--delta-data", frontier_args.delta_data,
                             "Data parity (derived from --test-data when omitted)");

    FrontierArgs aopac_args;
    auto* aopac_cmd = app.add_subcommand("aopac", "Normalized area over the parity-accuracy curve");
    add_common(aopac_cmd, aopac_args.common);
    aopac_cmd->add_option("--points", aopac_args.points, "CSV beta,accuracy,parity")->required();
    aopac_cmd->add_option("--test-data", aopac_args.test_data)->required();
    aopac_cmd->add_option("--delta-data", aopac_args.delta_data,
                          "Override the derived data parity");
    aopac_cmd->add_option("--grid-points", aopac_args.grid_points)->capture_default_str();

    BoundArgs bound_args;
    auto* bound_cmd = app.add_subcommand("bound-check",
                                         "Compare measured parity against the information bound");
    add_common(bound_cmd, bound_args.eval.common);
    add_eval_flags(bound_cmd, bound_args.eval, false);
    bound_cmd->add_option("--passes", bound_args.passes)->capture_default_str();
    bound_cmd->add_option("--refit-epochs", bound_args.refit_epochs)->capture_default_str();

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed()) return run_synth(synth_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (sweep_cmd->parsed()) return run_sweep(sweep_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (leak_cmd->parsed()) return run_leakage(leak_args);
        if (frontier_cmd->parsed()) return run_frontier(frontier_args);
        if (aopac_cmd->parsed()) return run_aopac(aopac_args);
        if (bound_cmd->parsed()) return run_bound_check(bound_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const DomainError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
