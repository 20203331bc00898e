#include <doctest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "kslab/io.hpp"

using namespace kslab;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "kslab_test_io";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("format_number round-trips") {
    for (double x : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, std::numeric_limits<double>::max()}) {
        CAPTURE(x);
        const std::string text = format_number(x);
        double back = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), back);
        CHECK(back == x);
    }
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(HUGE_VAL) == "inf");
    CHECK(format_number(-HUGE_VAL) == "-inf");
}

TEST_CASE("time series CSV") {
    TimeSeries ts;
    for (int i = 0; i < 3; ++i) {
        TimeRecord r;
        r.t = 0.1 * i;
        r.s = 1.0 / (i + 3.0);
        r.b = 1e-4 * std::exp(-i);
        r.lambda = std::exp(-0.7 * i);
        r.free_energy = 27.0 + i;
        ts.records.push_back(r);
    }
    ts.records.back().residual_phi = std::nan("");
    ts.records.back().gauge_rate = -HUGE_VAL;

    const auto path = scratch("series.csv");
    write_timeseries_csv(ts, path.string());
    const std::string text = slurp(path);

    SUBCASE("header lists the columns and lines end in CRLF") {
        std::string header;
        for (std::size_t k = 0; k < timeseries_columns().size(); ++k) header += (k ? "," : "") + timeseries_columns()[k];
        CHECK(text.rfind(header + "\r\n", 0) == 0);
        std::size_t crlf = 0, lf = 0;
        for (std::size_t i = 0; i < text.size(); ++i)
            if (text[i] == '\n') {
                ++lf;
                if (i > 0 && text[i - 1] == '\r') ++crlf;
            }
        CHECK(lf == 4);
        CHECK(crlf == lf);
    }

    SUBCASE("reads back bit for bit") {
        const auto back = read_timeseries_csv(path.string());
        REQUIRE(back.size() == ts.size());
        for (std::size_t i = 0; i < ts.size(); ++i) {
            CHECK(back.records[i].t == ts.records[i].t);
            CHECK(back.records[i].s == ts.records[i].s);
            CHECK(back.records[i].b == ts.records[i].b);
            CHECK(back.records[i].lambda == ts.records[i].lambda);
        }
        CHECK(std::isnan(back.records[2].residual_phi));
        CHECK(back.records[2].gauge_rate == -HUGE_VAL);
    }

    SUBCASE("ragged rows are rejected") {
        const auto bad = scratch("ragged.csv");
        std::ofstream(bad, std::ios::binary) << "t,s\r\n1,2\r\n3\r\n";
        CHECK_THROWS(read_timeseries_csv(bad.string()));
    }

    CHECK_THROWS(read_timeseries_csv(scratch("missing.csv").string()));
}

TEST_CASE("field CSV") {
    GridSpec s;
    s.h0 = 0.5;
    s.stretch = 0.0;
    s.r_max = 2.0;
    const auto g = RadialGrid::make(s);
    std::vector<double> a(g->size()), b(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) {
        a[i] = g->r(i) * g->r(i);
        b[i] = -g->r(i);
    }
    const auto path = scratch("fields.csv");
    // b[0] is -0 and keeps its sign.
    write_fields_csv(*g, {{"sq", a}, {"neg", b}}, path.string());
    CHECK(slurp(path) == "r,sq,neg\r\n0,0,-0\r\n0.5,0.25,-0.5\r\n1,1,-1\r\n1.5,2.25,-1.5\r\n2,4,-2\r\n");
    CHECK_THROWS_AS(write_fields_csv(*g, {{"short", {1.0}}}, path.string()), std::invalid_argument);
}
