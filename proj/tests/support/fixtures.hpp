#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "busghg/geo.hpp"
#include "busghg/pairing.hpp"
#include "busghg/time.hpp"

namespace fixture {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = fs::temp_directory_path() /
                ("busghg_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline busghg::Timestamp ts(const std::string& iso) { return *busghg::parse_timestamp(iso); }

inline constexpr busghg::UtcOffset kRio{-180};

/// A segment whose start and end lie on the equator `euclid_m` apart.
inline busghg::TravelSegment segment_with(double euclid_m, double dt_s, const std::string& line = "L",
                                          const std::string& start = "2015-03-03T10:00:00-03:00",
                                          const std::string& vehicle = "V") {
    const auto t0 = ts(start);
    const busghg::Timestamp t1{t0.ms + static_cast<std::int64_t>(dt_s * 1000.0)};
    const double dlon = euclid_m / busghg::kMetersPerDegree;
    auto s = busghg::make_segment(vehicle, line, busghg::SegmentEnd{{0.0, 0.0}, t0, 1},
                                  busghg::SegmentEnd{{0.0, dlon}, t1, 2}, kRio);
    s.euclid_m = euclid_m;  // exact value for arithmetic checks
    return s;
}

}  // namespace fixture
