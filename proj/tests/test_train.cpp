#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fcrl/train.hpp"

using namespace fcrl;

namespace {

Dataset small_dataset(std::uint64_t seed = 3) {
    SynthSpec spec;
    spec.n = 160;
    spec.p = 6;
    spec.group_prior = 0.4;
    spec.rho_yc = 0.2;
    spec.seed = seed;
    return generate_synthetic(spec);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.d = 3;
    cfg.hidden = 8;
    cfg.pred_hidden = 8;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.beta = 0.1;
    cfg.seed = 42;
    return cfg;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
    const Dataset ds = small_dataset();
    const TrainConfig cfg = small_config();
    const auto r1 = train(ds, cfg);
    const auto r2 = train(ds, cfg);
    CHECK(r1.state.model.pack() == r2.state.model.pack());
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t e = 0; e < r1.trace.size(); ++e)
        CHECK(r1.trace[e].total == r2.trace[e].total);

    TrainConfig other = cfg;
    other.seed = 43;
    const auto r3 = train(ds, other);
    CHECK(r1.state.model.pack() != r3.state.model.pack());
}

TEST_CASE("training makes progress on the objective") {
    const Dataset ds = small_dataset();
    TrainConfig cfg = small_config();
    cfg.epochs = 25;
    cfg.beta = 0.01;
    const auto r = train(ds, cfg);
    REQUIRE(r.trace.size() == 25);
    CHECK(r.trace.back().total < r.trace.front().total);
    CHECK(r.trace.back().label_loss < r.trace.front().label_loss);
    for (const auto& bd : r.trace) {
        CHECK(std::isfinite(bd.total));
        CHECK(bd.rate >= 0.0);
    }
}

TEST_CASE("checkpoint round-trip preserves state bit-exactly") {
    const Dataset ds = small_dataset();
    const TrainConfig cfg = small_config();
    auto r = train(ds, cfg);
    const std::string path = temp_path("fcrl_ckpt_roundtrip.json");
    save_checkpoint(r.state, path, cfg.beta);
    double beta = -1.0;
    TrainState loaded = load_checkpoint(path, &beta);
    CHECK(beta == cfg.beta);
    CHECK(loaded.epochs_done == r.state.epochs_done);
    CHECK(loaded.model.pack() == r.state.model.pack());
    REQUIRE(loaded.adam.first_moments().size() == r.state.adam.first_moments().size());
    for (std::size_t t = 0; t < loaded.adam.first_moments().size(); ++t) {
        CHECK(loaded.adam.first_moments()[t].data() == r.state.adam.first_moments()[t].data());
        CHECK(loaded.adam.second_moments()[t].data() == r.state.adam.second_moments()[t].data());
    }
    CHECK(loaded.adam.step_count() == r.state.adam.step_count());
    std::remove(path.c_str());
}

TEST_CASE("resumed training matches an uninterrupted run") {
    const Dataset ds = small_dataset();
    TrainConfig cfg = small_config();
    cfg.epochs = 5;
    const auto full = train(ds, cfg);

    TrainConfig head = cfg;
    head.epochs = 3;
    auto part = train(ds, head);
    const std::string path = temp_path("fcrl_ckpt_resume.json");
    save_checkpoint(part.state, path, cfg.beta);
    TrainState resumed = load_checkpoint(path);
    const auto tail = run_epochs(resumed, ds, cfg, 2);

    CHECK(resumed.epochs_done == 5);
    CHECK(resumed.model.pack() == full.state.model.pack());
    REQUIRE(tail.size() == 2);
    CHECK(tail[0].total == full.trace[3].total);
    CHECK(tail[1].total == full.trace[4].total);
    std::remove(path.c_str());
}

TEST_CASE("corrupt or mismatched checkpoints are rejected") {
    const std::string path = temp_path("fcrl_ckpt_bad.json");
    SECTION("missing file") {
        CHECK_THROWS_AS(load_checkpoint(temp_path("fcrl_no_such_ckpt.json")), DataError);
    }
    SECTION("not JSON") {
        std::ofstream(path) << "definitely not json{{{";
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SECTION("wrong version") {
        std::ofstream(path) << R"({"version": 999})";
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SECTION("missing tensors") {
        std::ofstream(path) << R"({"version": 1, "beta": 0.1, "epochs_done": 2})";
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    std::remove(path.c_str());
}

TEST_CASE("default beta grid and warm-start epoch accounting") {
    const auto grid = default_beta_grid();
    REQUIRE(grid.size() == 30);
    CHECK(grid.front() == Catch::Approx(0.005));
    CHECK(grid[9] == Catch::Approx(0.05));
    CHECK(grid[10] == Catch::Approx(0.05));
    CHECK(grid.back() == Catch::Approx(1.0));
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] >= grid[i - 1]);

    SweepConfig sc;
    sc.warm_start = true;
    CHECK(sc.total_epochs(200) == 780);
    sc.warm_start = false;
    CHECK(sc.total_epochs(200) == 6000);
}

TEST_CASE("single-point cold sweep equals plain training") {
    const Dataset ds = small_dataset();
    const TrainConfig cfg = small_config();
    SweepConfig sc;
    sc.beta_grid = {cfg.beta};
    sc.warm_start = false;
    const auto sw = sweep(ds, cfg, sc);
    REQUIRE(sw.entries.size() == 1);
    CHECK(sw.total_epochs == cfg.epochs);
    const auto plain = train(ds, cfg);
    CHECK(sw.entries[0].state.model.pack() == plain.state.model.pack());
}

TEST_CASE("warm-start sweep reuses weights and counts epochs correctly") {
    const Dataset ds = small_dataset();
    TrainConfig cfg = small_config();
    cfg.epochs = 4;
    SweepConfig sc;
    sc.beta_grid = {0.01, 0.05, 0.1};
    sc.warm_start = true;
    sc.finetune_epochs = 2;
    const auto sw = sweep(ds, cfg, sc);
    REQUIRE(sw.entries.size() == 3);
    CHECK(sw.total_epochs == 4 + 2 * 2);
    CHECK(sw.entries[0].epochs_executed == 4);
    CHECK(sw.entries[1].epochs_executed == 2);
    CHECK(sw.entries[2].epochs_executed == 2);
    // consecutive entries must differ: finetuning actually moved the weights
    CHECK(sw.entries[0].state.model.pack() != sw.entries[1].state.model.pack());
    CHECK(sw.entries[1].state.model.pack() != sw.entries[2].state.model.pack());

    // cold sweep over the same grid retrains from scratch each time
    sc.warm_start = false;
    const auto cold = sweep(ds, cfg, sc);
    CHECK(cold.total_epochs == 12);
    TrainConfig solo = cfg;
    solo.beta = 0.05;
    CHECK(cold.entries[1].state.model.pack() == train(ds, solo).state.model.pack());
}

TEST_CASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(TrainConfig{.epochs = 0}.validate(), DomainError);
    CHECK_THROWS_AS(TrainConfig{.batch_size = 1}.validate(), DomainError);
    CHECK_THROWS_AS(TrainConfig{.beta = -0.1}.validate(), DomainError);
    SweepConfig sc;
    sc.beta_grid = {};
    CHECK_THROWS_AS(sc.validate(), DomainError);
    sc.beta_grid = {0.2, 0.1};
    CHECK_THROWS_AS(sc.validate(), DomainError);
}

TEST_CASE("trace CSV has the documented layout") {
    const Dataset ds = small_dataset();
    const auto r = train(ds, small_config());
    const std::string path = temp_path("fcrl_trace.csv");
    write_trace_csv(r.trace, path);
    std::ifstream f(path);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "epoch,label_loss,rate,contrastive,total");
    std::size_t rows = 0;
    while (std::getline(f, line)) {
        CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
        ++rows;
    }
    CHECK(rows == r.trace.size());
    std::remove(path.c_str());
}
