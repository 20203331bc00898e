#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "kslab/radial_grid.hpp"
#include "kslab/timeseries.hpp"

namespace kslab {

// Shortest decimal that round-trips the double ('.' separator, no locale).
std::string format_number(double x);

// Column order of write_timeseries_csv.
const std::vector<std::string>& timeseries_columns();

void write_timeseries_csv(const TimeSeries& series, std::ostream& os);
void write_timeseries_csv(const TimeSeries& series, const std::string& path);

TimeSeries read_timeseries_csv(const std::string& path);

// "r,<name>,..." with one row per grid node; every column must have grid size.
using NamedColumn = std::pair<std::string, std::vector<double>>;
void write_fields_csv(const RadialGrid& grid, const std::vector<NamedColumn>& columns, const std::string& path);

}  // namespace kslab
