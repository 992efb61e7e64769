#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <sstream>

#include "busghg/config.hpp"
#include "busghg/csv.hpp"
#include "busghg/parallel.hpp"
#include "busghg/time.hpp"
#include "support/fixtures.hpp"

using namespace busghg;
using fixture::TempDir;

TEST(Time, ParsesOffsetsToTheSameInstant) {
    const auto a = parse_timestamp("2015-03-01T10:00:00-03:00");
    const auto b = parse_timestamp("2015-03-01T13:00:00Z");
    const auto c = parse_timestamp("2015-03-01 13:00:00+0000");
    ASSERT_TRUE(a && b && c);
    EXPECT_EQ(*a, *b);
    EXPECT_EQ(*b, *c);
}

TEST(Time, RejectsTimestampsWithoutOffset) {
    EXPECT_FALSE(parse_timestamp("2015-03-01T10:00:00"));
    EXPECT_FALSE(parse_timestamp("2015-02-30T10:00:00Z"));
    EXPECT_FALSE(parse_timestamp("2015-03-01T24:00:00Z"));
    EXPECT_FALSE(parse_timestamp("garbage"));
}

TEST(Time, FormatRoundTrips) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::int64_t> ms(1'300'000'000'000, 1'500'000'000'000);
    for (int i = 0; i < 2000; ++i) {
        const Timestamp t{ms(rng)};
        for (const auto off : {UtcOffset{-180}, UtcOffset{0}, UtcOffset{330}}) {
            const auto back = parse_timestamp(format_timestamp(t, off));
            ASSERT_TRUE(back);
            EXPECT_EQ(back->ms, t.ms);
        }
    }
}

TEST(Time, CalendarAttributionUsesConfiguredOffset) {
    // 01:30 UTC on Monday is still Sunday evening in Rio.
    const auto t = fixture::ts("2015-03-02T01:30:00Z");
    EXPECT_EQ(format_date(local_day(t, fixture::kRio)), "2015-03-01");
    EXPECT_EQ(local_hour(t, fixture::kRio), 22);
    EXPECT_EQ(weekday_index(local_day(t, fixture::kRio)), 6u);
    EXPECT_EQ(local_hour(t, UtcOffset{0}), 1);
}

TEST(Time, WeekdayNamesAndMonths) {
    EXPECT_EQ(weekday_index(*parse_date("2015-03-03")), 1u);  // a Tuesday
    EXPECT_EQ(parse_weekday("tue"), 1u);
    EXPECT_FALSE(parse_weekday("Tues"));
    EXPECT_EQ(format_year_month(year_month_of(*parse_date("2015-12-31"))), "2015-12");
    EXPECT_FALSE(parse_year_month("2015-13"));
}

TEST(Csv, SplitHonoursQuotes) {
    const auto f = csv::split(R"(a,"b,c","d ""q""",)");
    ASSERT_EQ(f.size(), 4u);
    EXPECT_EQ(f[1], "b,c");
    EXPECT_EQ(f[2], "d \"q\"");
    EXPECT_EQ(f[3], "");
}

TEST(Csv, DoublesRoundTripExactly) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 5000; ++i) {
        const double v = u(rng);
        EXPECT_EQ(*csv::parse_double(csv::format_double(v)), v);
    }
    EXPECT_FALSE(csv::parse_double("1.5x"));
    EXPECT_FALSE(csv::parse_double("nan"));
}

TEST(Csv, HeaderMismatchIsADataError) {
    std::istringstream in("a,b\n1,2\n");
    EXPECT_THROW(csv::read_table(in, "mem", {"a", "c"}), DataError);
}

TEST(Csv, CommentsAndBlankLinesAreSkipped) {
    std::istringstream in("# note\na,b\n\n1,2\n# tail\n3,4\n");
    const auto t = csv::read_table(in, "mem", {"a", "b"});
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1][0], "3");
    EXPECT_EQ(t.line_numbers[1], 6u);
    EXPECT_EQ(t.comments.size(), 2u);
}

TEST(Parallel, OutputDoesNotDependOnWorkers) {
    const std::size_t n = 10'007;
    std::vector<double> one(n), many(n);
    auto f = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 3.0; };
    parallel_for(n, 1, [&](std::size_t i) { one[i] = f(i); });
    parallel_for(n, 7, [&](std::size_t i) { many[i] = f(i); });
    EXPECT_EQ(one, many);
}

TEST(Parallel, RethrowsWorkerErrors) {
    EXPECT_THROW(parallel_for(100, 4,
                              [](std::size_t i) {
                                  if (i == 77) {
                                      throw DataError("boom");
                                  }
                              }),
                 DataError);
}

TEST(Config, FileThenOverridesInOrder) {
    TempDir dir("cfg");
    fixture::write_text(dir / "run.ini",
                        "# comment\n"
                        "gps.path = gps.csv\n"
                        "pairing.max_gap_s = 200\n"
                        "sinuosity.fraction=0.05\n"
                        "analysis.weekdays = Tue,Thu\n");
    const auto cfg = load_config((dir / "run.ini").string(), {{"pairing.max_gap_s", "150"}});
    EXPECT_EQ(cfg.pairing.max_gap_s, 150.0);
    EXPECT_EQ(cfg.sample_fraction, 0.05);
    EXPECT_EQ(cfg.gps_path, (dir / "gps.csv").lexically_normal().string());
    EXPECT_EQ(cfg.lattice_weekdays, (std::set<unsigned>{1, 3}));
}

TEST(Config, UnknownKeyAndBadValuesAreConfigErrors) {
    RunConfig cfg;
    EXPECT_THROW(apply_setting(cfg, "no.such.key", "1"), ConfigError);
    EXPECT_THROW(apply_setting(cfg, "pairing.max_gap_s", "fast"), ConfigError);
    EXPECT_THROW(split_setting("novalue", "--set"), ConfigError);
    cfg.sample_fraction = 0.0;
    EXPECT_THROW(validate_parameters(cfg), ConfigError);
}

TEST(Config, MissingInputFileNamesThePath) {
    RunConfig cfg;
    cfg.gps_path = "/nonexistent/gps.csv";
    try {
        validate_config(cfg);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/gps.csv"), std::string::npos);
    }
}
