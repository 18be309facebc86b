#pragma once

#include <string>
#include <vector>

namespace ia2u::tasks {

/// Per-row metrics plus their arithmetic mean. Written as CSV with a header
/// `id,<columns...>` and a final row whose id is "mean".
struct MetricReport {
    std::vector<std::string> columns;
    struct Row {
        std::string id;
        std::vector<double> values;
    };
    std::vector<Row> rows;

    void add(std::string id, std::vector<double> values);
    /// Arithmetic mean of every column over the rows (zeros when empty).
    std::vector<double> mean() const;
    /// Mean of one column by name; throws ValidationError for unknown names.
    double mean(const std::string& column) const;

    std::string to_csv() const;
    /// Throws IoError when the file cannot be written.
    void write_csv(const std::string& path) const;
    /// Parses to_csv() output; the "mean" row is dropped (it is recomputed).
    static MetricReport parse_csv(const std::string& text);
    static MetricReport read_csv(const std::string& path);
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_metric(double v);

}  // namespace ia2u::tasks
