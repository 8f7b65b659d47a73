#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "racket/http_endpoint.hpp"
#include "racket/pipeline.hpp"
#include "racket/protocol.hpp"
#include "racket/simulator.hpp"
#include "racket/store.hpp"

using namespace racket;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
}

}  // namespace

TEST_CASE("config parsing covers sections, comments and types") {
    auto cfg = parse_pipeline_config(R"(
# fleet under test
[fleet]
workers = 12          # inline comment
regulars = 7
organic_fraction = 0.5
duration_days = 3
seed = 99
dropout = 0.1

[faults]
drop = 0.05
reinstall_rate = 0.1

[train]
folds = 5
repeats = 2
trees = 21
smote_ratio = 0.8

[paths]
out_dir = "/tmp/somewhere"
)");
    CHECK(cfg.fleet.workers == 12);
    CHECK(cfg.fleet.regulars == 7);
    CHECK(cfg.fleet.organic_fraction == 0.5);
    CHECK(cfg.fleet.duration_days == 3);
    CHECK(cfg.fleet.seed == 99);
    CHECK(cfg.fleet.dropout == doctest::Approx(0.1));
    CHECK(cfg.faults.drop == doctest::Approx(0.05));
    CHECK(cfg.faults.reinstall_rate == doctest::Approx(0.1));
    CHECK(cfg.train.folds == 5);
    CHECK(cfg.train.repeats == 2);
    CHECK(cfg.train.trees == 21);
    CHECK(cfg.train.smote_ratio == doctest::Approx(0.8));
    CHECK(cfg.out_dir == "/tmp/somewhere");
}

TEST_CASE("config parsing rejects bad input") {
    CHECK_THROWS_AS(parse_pipeline_config("[fleet]\nworkers = 5\n"), StageError);  // no seed
    CHECK_THROWS_AS(parse_pipeline_config("[fleet]\nseed = 1\nbogus_key = 2\n"), StageError);
    CHECK_THROWS_AS(parse_pipeline_config("[bogus_section]\nseed = 1\n"), StageError);
    CHECK_THROWS_AS(parse_pipeline_config("[fleet]\nseed = not_a_number\n"), StageError);
    CHECK_THROWS_AS(parse_pipeline_config("[fleet]\nseed = 1\nworkers\n"), StageError);
    try {
        parse_pipeline_config("[fleet]\nworkers = 5\n");
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.exit_code() == 2);
        CHECK(e.stage() == "config");
    }
}

TEST_CASE("RACKET_OUT_DIR overrides the configured path") {
    auto dir = temp_dir("racket_cfg_env");
    write_file(dir / "fleet.toml", "[fleet]\nseed = 3\n[paths]\nout_dir = \"/cfg/path\"\n");
    ::setenv("RACKET_OUT_DIR", "/env/path", 1);
    auto cfg = load_pipeline_config(dir / "fleet.toml");
    CHECK(cfg.out_dir == "/env/path");
    ::unsetenv("RACKET_OUT_DIR");
    auto cfg2 = load_pipeline_config(dir / "fleet.toml");
    CHECK(cfg2.out_dir == "/cfg/path");
    fs::remove_all(dir);
}

TEST_CASE("stages surface missing inputs as data errors") {
    auto dir = temp_dir("racket_missing");
    CHECK_THROWS_AS(stage_fingerprint(dir / "no_store", dir / "devices.jsonl"), StageError);
    try {
        stage_fingerprint(dir / "no_store", dir / "devices.jsonl");
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.exit_code() == 2);
    }
    CHECK_THROWS_AS(load_pipeline_config(dir / "nope.toml"), StageError);
    fs::remove_all(dir);
}

TEST_CASE("the full pipeline runs end to end and its manifest is reproducible") {
    auto dir = temp_dir("racket_pipeline_e2e");
    PipelineConfig cfg;
    cfg.fleet.workers = 40;
    cfg.fleet.regulars = 20;
    cfg.fleet.duration_days = 3;
    cfg.fleet.seed = 7;
    cfg.fleet.screen_scale = 0.3;
    cfg.train.repeats = 1;
    cfg.train.trees = 10;
    cfg.out_dir = (dir / "run1").string();
    run_pipeline(cfg);

    PipelinePaths paths{dir / "run1"};
    for (const auto& p :
         {paths.devices(), paths.app_instances(), paths.device_instances(), paths.report_csv(),
          paths.manifest(), paths.models_dir() / "app_random_forest.rsml"})
        CHECK(fs::exists(p));

    auto manifest = nlohmann::json::parse(read_file(paths.manifest()));
    CHECK(manifest["digest_algorithm"] == "SHA-256");
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["artifacts"].contains("devices.jsonl"));
    CHECK(manifest["artifacts"].contains("report.csv"));
    for (const auto& [k, v] : manifest["artifacts"].items())
        CHECK(v.get<std::string>().size() == 64);

    cfg.out_dir = (dir / "run2").string();
    run_pipeline(cfg);
    CHECK(read_file(paths.manifest()) == read_file(PipelinePaths{dir / "run2"}.manifest()));
    CHECK(read_file(paths.devices()) == read_file(PipelinePaths{dir / "run2"}.devices()));
    fs::remove_all(dir);
}

TEST_CASE("ingest over http matches in-process ingest") {
    MemorySink sink;
    FleetConfig fleet;
    fleet.workers = 3;
    fleet.regulars = 2;
    fleet.duration_days = 2;
    fleet.seed = 17;
    fleet.screen_scale = 0.2;
    generate_fleet(fleet, sink);

    SnapshotStore direct;
    {
        InProcessTransport transport(direct);
        std::map<std::string, SnapshotClient> clients;
        for (const auto& r : sink.snapshots) {
            const auto& id = install_id_of(r);
            clients.try_emplace(id, id, "100001").first->second.record(r);
        }
        for (auto& [_, c] : clients) {
            c.flush();
            REQUIRE(c.upload_until_drained(transport).retained == 0);
        }
    }

    SnapshotStore over_http;
    IngestServer server(over_http, "127.0.0.1", 0);
    REQUIRE(server.start());
    {
        HttpTransport transport("127.0.0.1", server.port());
        std::map<std::string, SnapshotClient> clients;
        for (const auto& r : sink.snapshots) {
            const auto& id = install_id_of(r);
            clients.try_emplace(id, id, "100001").first->second.record(r);
        }
        for (auto& [_, c] : clients) {
            c.flush();
            REQUIRE(c.upload_until_drained(transport).retained == 0);
        }
    }
    server.stop();
    CHECK(over_http.serialize_all() == direct.serialize_all());
}
