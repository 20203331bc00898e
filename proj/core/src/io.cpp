#include "kslab/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kslab {

namespace {

using Member = double TimeRecord::*;

const std::vector<std::pair<std::string, Member>>& members() {
    static const std::vector<std::pair<std::string, Member>> m = {
        {"t", &TimeRecord::t},
        {"s", &TimeRecord::s},
        {"lambda", &TimeRecord::lambda},
        {"b", &TimeRecord::b},
        {"b_hat", &TimeRecord::b_hat},
        {"mass", &TimeRecord::mass},
        {"free_energy", &TimeRecord::free_energy},
        {"E2_norm", &TimeRecord::E2_norm},
        {"lyapunov", &TimeRecord::lyapunov},
        {"residual_phi", &TimeRecord::residual_phi},
        {"residual_lstar_phi", &TimeRecord::residual_lstar_phi},
        {"gauge_rate", &TimeRecord::gauge_rate},
        {"min_density", &TimeRecord::min_density},
    };
    return m;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    return os;
}

double parse_number(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double x = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || p != s.data() + s.size()) throw std::runtime_error("bad number '" + s + "'");
    return x;
}

}  // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

const std::vector<std::string>& timeseries_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> c;
        for (const auto& [name, _] : members()) c.push_back(name);
        return c;
    }();
    return cols;
}

void write_timeseries_csv(const TimeSeries& series, std::ostream& os) {
    const auto& m = members();
    for (std::size_t k = 0; k < m.size(); ++k) os << (k ? "," : "") << m[k].first;
    os << "\r\n";
    for (const auto& r : series.records) {
        for (std::size_t k = 0; k < m.size(); ++k) os << (k ? "," : "") << format_number(r.*(m[k].second));
        os << "\r\n";
    }
}

void write_timeseries_csv(const TimeSeries& series, const std::string& path) {
    auto os = open_out(path);
    write_timeseries_csv(series, os);
}

TimeSeries read_timeseries_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    auto split = [](std::string line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
    const auto header = split(line);
    const auto& m = members();
    std::vector<Member> slot;
    for (const auto& h : header) {
        Member found = nullptr;
        for (const auto& [name, mem] : m)
            if (name == h) found = mem;
        slot.push_back(found);  // unknown columns are skipped
    }
    TimeSeries ts;
    while (std::getline(is, line)) {
        const auto cells = split(line);
        if (cells.empty()) continue;
        if (cells.size() != header.size()) throw std::runtime_error(path + ": ragged row");
        TimeRecord r;
        for (std::size_t k = 0; k < cells.size(); ++k)
            if (slot[k]) r.*(slot[k]) = parse_number(cells[k]);
        ts.records.push_back(r);
    }
    return ts;
}

void write_fields_csv(const RadialGrid& grid, const std::vector<NamedColumn>& columns, const std::string& path) {
    for (const auto& [name, v] : columns)
        if (v.size() != grid.size()) throw std::invalid_argument("write_fields_csv: column '" + name + "' has wrong size");
    auto os = open_out(path);
    os << "r";
    for (const auto& c : columns) os << ',' << c.first;
    os << "\r\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        os << format_number(grid.r(i));
        for (const auto& c : columns) os << ',' << format_number(c.second[i]);
        os << "\r\n";
    }
}

}  // namespace kslab
