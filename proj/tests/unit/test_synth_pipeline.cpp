#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "busghg/config.hpp"
#include "busghg/io.hpp"
#include "busghg/pipeline.hpp"
#include "busghg/synthgen.hpp"
#include "support/fixtures.hpp"
#include "support/scenarios.hpp"

using namespace busghg;
namespace fs = std::filesystem;
using fixture::TempDir;

namespace {

synth::Scenario straight_ten_km() {
    synth::Scenario s;
    s.grid.rows = 2;
    s.grid.cols = 11;
    s.grid.spacing_m = 1000.0;
    s.sampling_interval_s = 120;
    s.start_date = *parse_date("2015-03-03");
    s.days = 1;
    auto l = scenario::line("X", {{0, 0}, {0, 10}}, 1, 30.0);
    l.service_start_h = 5;
    l.service_end_h = 6;
    l.layover_intervals = 30;  // no time for a return trip
    s.lines = {l};
    s.curve = {SpeedBand{0, std::numeric_limits<double>::infinity(), 0.5}};
    s.fuels = {FuelSpec{"B7", kDieselB7Factor, s.start_date, s.end_date()}};
    return s;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(BUSGHG_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> output_files(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("manifest", 0) != 0) {
            names.push_back(fs::relative(e.path(), dir).string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

void expect_same_outputs(const fs::path& a, const fs::path& b) {
    const auto names = output_files(a);
    ASSERT_EQ(names, output_files(b));
    ASSERT_FALSE(names.empty());
    for (const auto& n : names) {
        EXPECT_EQ(fixture::read_text(a / n), fixture::read_text(b / n)) << n;
    }
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST(Synth, StraightRouteKinematics) {
    const auto c = synth::generate(straight_ten_km());
    ASSERT_EQ(c.ledger.size(), 1u);
    EXPECT_NEAR(c.ledger[0].distance_m, 10'000.0, 10.0);
    ASSERT_EQ(c.pings.size(), 11u);  // ten legs plus the arrival fix
    for (std::size_t i = 1; i < c.pings.size(); ++i) {
        EXPECT_NEAR(haversine_distance(c.pings[i - 1].position, c.pings[i].position), 1000.0, 1.0);
        EXPECT_EQ(c.pings[i].time.ms - c.pings[i - 1].time.ms, 120'000);
    }
    EXPECT_NEAR(c.legs[0].distance_m * 3.6 / c.legs[0].dt_s, 30.0, 0.05);
}

TEST(Synth, ZeroRetentionDropsEveryFixButNotTheLedger) {
    auto s = scenario::small_city(3);
    const auto full = synth::generate(s);
    s.baseline_retention = 0.0;
    const auto none = synth::generate(s);
    EXPECT_TRUE(none.pings.empty());
    EXPECT_EQ(none.pings_generated, full.pings_generated);
    ASSERT_EQ(none.ledger.size(), full.ledger.size());
    for (std::size_t i = 0; i < full.ledger.size(); ++i) {
        EXPECT_EQ(none.ledger[i].co2e_kg, full.ledger[i].co2e_kg);
    }
}

TEST(Synth, LedgerMatchesEmissionsOnDriveLog) {
    const auto s = scenario::small_city(4);
    const auto c = synth::generate(s);
    const ConsumptionCurve curve(s.curve);
    const FuelTable fuels(s.fuels);
    // Legs are in ledger order: one run of legs per (day, vehicle) row.
    std::size_t leg = 0;
    for (const auto& row : c.ledger) {
        double dist = 0.0, fuel = 0.0, co2e = 0.0;
        while (leg < c.legs.size() && c.legs[leg].vehicle == row.vehicle && c.legs[leg].day == row.day) {
            const auto& l = c.legs[leg++];
            const double f = fuel_consumption(l.distance_m, speed_kmh(l.distance_m, l.dt_s), curve);
            dist += l.distance_m;
            fuel += f;
            co2e += co2e_emissions(f, l.day, fuels);
        }
        EXPECT_EQ(dist, row.distance_m);
        EXPECT_EQ(fuel, row.fuel_l);
        EXPECT_EQ(co2e, row.co2e_kg);
    }
    EXPECT_EQ(leg, c.legs.size());
}

TEST(Synth, SameSeedSameCorpus) {
    auto s = scenario::small_city(2);
    s.baseline_retention = 0.7;
    s.jitter_m = 5.0;
    const auto a = synth::generate(s);
    const auto b = synth::generate(s);
    ASSERT_EQ(a.pings.size(), b.pings.size());
    for (std::size_t i = 0; i < a.pings.size(); ++i) {
        EXPECT_EQ(a.pings[i].position.lat, b.pings[i].position.lat);
        EXPECT_EQ(a.pings[i].time, b.pings[i].time);
    }
    s.seed = 6;
    EXPECT_NE(synth::generate(s).pings.size(), a.pings.size());
}

TEST(Synth, DisconnectedRouteIsADataError) {
    auto s = scenario::small_city(1);
    s.grid.removed_edges.push_back({{1, 3}, {1, 4}});
    EXPECT_THROW(synth::generate(s), DataError);
}

TEST(Io, SegmentsRoundTripBitExactly) {
    TempDir dir("io");
    const auto c = synth::generate(scenario::small_city(2));
    synth::write_corpus(c, scenario::small_city(2), dir.path());
    auto cfg = load_config((dir / "config.ini").string(), {{"output.dir", (dir / "out").string()}});
    Manifest m(cfg, "test");
    const auto ingested = stage_ingest(cfg, m);
    ASSERT_FALSE(ingested.segments.empty());
    const auto back = io::read_segments((dir / "out" / files::segments).string(), cfg.utc_offset);
    ASSERT_EQ(back.size(), ingested.segments.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].euclid_m, ingested.segments[i].euclid_m);
        EXPECT_EQ(back[i].dt_s, ingested.segments[i].dt_s);
        EXPECT_EQ(back[i].start.position.lon, ingested.segments[i].start.position.lon);
        EXPECT_EQ(back[i].day, ingested.segments[i].day);
    }
}

class PipelineTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto s = scenario::small_city();
        synth::write_corpus(synth::generate(s), s, dir_.path());
    }
    fs::path config() const { return dir_ / "config.ini"; }
    fs::path path(const std::string& name) const { return dir_ / name; }
    // Subcommand first, then the config flag, then the rest.
    std::string cli(const std::string& args) {
        const auto sp = args.find(' ');
        return args.substr(0, sp) + " -c '" + config().string() + "'" +
               (sp == std::string::npos ? "" : args.substr(sp));
    }

    TempDir dir_{"pipe"};
};

TEST_F(PipelineTest, RunWritesEveryProductAndManifest) {
    const auto cfg = load_config(config().string(), {{"output.dir", path("out").string()}});
    const auto m = run_pipeline(cfg);
    for (const char* f : {files::segments, files::sinuosity, files::emissions, files::daily, files::ranges,
                          files::filled, files::monthly, files::lattice, files::temporal, files::lines,
                          files::freeflow, files::validation}) {
        EXPECT_TRUE(fs::exists(path("out") / f)) << f;
    }
    const auto j = read_json(path("out") / "manifest.json");
    EXPECT_EQ(j["command"], "run");
    EXPECT_EQ(j["config"]["sinuosity.fraction"], "0.5");
    EXPECT_GT(j["mean_s"].get<double>(), 1.0);
    const auto lattice = read_json(path("out") / files::lattice);
    EXPECT_EQ(lattice["type"], "FeatureCollection");
}

TEST_F(PipelineTest, CliRunTwiceIsIdentical) {
    ASSERT_EQ(run_cli(cli("run -o '" + path("a").string() + "'"), path("a.log")), 0) << fixture::read_text(path("a.log"));
    ASSERT_EQ(run_cli(cli("run -o '" + path("b").string() + "'"), path("b.log")), 0);
    expect_same_outputs(path("a"), path("b"));
}

TEST_F(PipelineTest, SubcommandsMatchOneShotRun) {
    const auto out = path("steps").string();
    for (const char* stage : {"ingest", "sinuosity", "emissions", "gapfill", "analyze"}) {
        ASSERT_EQ(run_cli(cli(std::string(stage) + " -o '" + out + "'"), path("s.log")), 0)
            << stage << ": " << fixture::read_text(path("s.log"));
        EXPECT_TRUE(fs::exists(fs::path(out) / ("manifest_" + std::string(stage) + ".json")));
    }
    ASSERT_EQ(run_cli(cli("run -o '" + path("once").string() + "'"), path("r.log")), 0);
    expect_same_outputs(path("steps"), path("once"));
}

TEST_F(PipelineTest, AnalyzeOverrideIsRecorded) {
    const auto out = path("ov").string();
    ASSERT_EQ(run_cli(cli("run -o '" + out + "'"), path("r.log")), 0);
    const auto before = fixture::read_text(fs::path(out) / files::lines);
    ASSERT_EQ(run_cli(cli("analyze --mean-s 1.5 -o '" + out + "'"), path("a.log")), 0)
        << fixture::read_text(path("a.log"));
    const auto j = read_json(fs::path(out) / "manifest_analyze.json");
    EXPECT_EQ(j["mean_s"].get<double>(), 1.5);
    EXPECT_EQ(j["mean_s_source"], "override");
    EXPECT_EQ(j["config"]["sinuosity.mean_override"], "1.5");
    EXPECT_FALSE(j["warnings"].empty());
    EXPECT_NE(fixture::read_text(fs::path(out) / files::lines), before);
}

TEST_F(PipelineTest, RunWithOverrideSkipsTheGraph) {
    const auto out = path("nograph").string();
    ASSERT_EQ(run_cli(cli("run --mean-s 1.2 --set graph.nodes=/nonexistent.csv -o '" + out + "'"), path("l.log")), 0)
        << fixture::read_text(path("l.log"));
    EXPECT_FALSE(fs::exists(fs::path(out) / files::sinuosity));
    EXPECT_EQ(read_json(fs::path(out) / "manifest.json")["mean_s"].get<double>(), 1.2);
}

TEST_F(PipelineTest, MissingCurveFileIsAConfigErrorNamingThePath) {
    const auto log = path("err.log");
    EXPECT_EQ(run_cli(cli("run --set curve.path=/nowhere/curve.csv -o '" + path("x").string() + "'"), log), 1);
    EXPECT_NE(fixture::read_text(log).find("/nowhere/curve.csv"), std::string::npos);
}

TEST_F(PipelineTest, ExitCodes) {
    EXPECT_EQ(run_cli("--bogus-flag", path("e1.log")), 1);
    EXPECT_EQ(run_cli(cli("run --set pairing.max_gap_s=-1"), path("e2.log")), 1);
    // A corrupt street graph is a data problem.
    fixture::write_text(path("bad_edges.csv"), "node_a,node_b,length_m,oneway\n0,999,100,0\n");
    EXPECT_EQ(run_cli(cli("run --set graph.edges=" + path("bad_edges.csv").string() + " -o '" +
                          path("y").string() + "'"),
                      path("e3.log")),
              2);
    EXPECT_NE(fixture::read_text(path("e3.log")).find("unknown node"), std::string::npos);
    // A stage input with the wrong schema is rejected loudly.
    fixture::write_text(path("z/segments.csv"), "a,b\n1,2\n");
    EXPECT_EQ(run_cli(cli("sinuosity -o '" + path("z").string() + "'"), path("e4.log")), 2);
    EXPECT_NE(fixture::read_text(path("e4.log")).find("schema mismatch"), std::string::npos);
}

TEST_F(PipelineTest, SynthCommandWritesACorpus) {
    const auto json_path = path("scenario.json");
    fixture::write_text(json_path, R"({"seed": 3, "days": 2, "start_date": "2015-03-02",
      "grid": {"rows": 4, "cols": 4, "spacing_m": 200},
      "lines": [{"id": "7", "waypoints": [[0,0],[3,3]], "buses": 1, "speed_kmh": 24}],
      "sampling_interval_s": 60})");
    ASSERT_EQ(run_cli("synth '" + json_path.string() + "' -o '" + path("corpus").string() + "'", path("s.log")), 0)
        << fixture::read_text(path("s.log"));
    for (const char* f : {"gps.csv", "nodes.csv", "edges.csv", "ledger.csv", "config.ini", "curve.csv"}) {
        EXPECT_TRUE(fs::exists(path("corpus") / f)) << f;
    }
    ASSERT_EQ(run_cli("run -c '" + (path("corpus") / "config.ini").string() + "'", path("r.log")), 0)
        << fixture::read_text(path("r.log"));
    EXPECT_TRUE(fs::exists(path("corpus") / "out" / "manifest.json"));
}
