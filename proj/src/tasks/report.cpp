#include "ia2u/tasks/report.hpp"

#include "ia2u/core/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ia2u::tasks {

std::string format_metric(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void MetricReport::add(std::string id, std::vector<double> values) {
    if (values.size() != columns.size()) {
        throw ValidationError("metric row has " + std::to_string(values.size()) + " values for " +
                              std::to_string(columns.size()) + " columns");
    }
    rows.push_back({std::move(id), std::move(values)});
}

std::vector<double> MetricReport::mean() const {
    std::vector<double> out(columns.size(), 0.0);
    if (rows.empty()) {
        return out;
    }
    for (const auto& r : rows) {
        for (size_t c = 0; c < out.size(); ++c) {
            out[c] += r.values[c];
        }
    }
    for (auto& v : out) {
        v /= static_cast<double>(rows.size());
    }
    return out;
}

double MetricReport::mean(const std::string& column) const {
    for (size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] == column) {
            return mean()[c];
        }
    }
    throw ValidationError("report has no column '" + column + "'");
}

std::string MetricReport::to_csv() const {
    std::string out = "id";
    for (const auto& c : columns) {
        out += "," + c;
    }
    out += '\n';
    auto emit = [&](const std::string& id, const std::vector<double>& values) {
        out += id;
        for (const double v : values) {
            out += "," + format_metric(v);
        }
        out += '\n';
    };
    for (const auto& r : rows) {
        emit(r.id, r.values);
    }
    emit("mean", mean());
    return out;
}

void MetricReport::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write metrics CSV '" + path + "'");
    }
    out << to_csv();
    if (!out) {
        throw IoError("failed writing metrics CSV '" + path + "'");
    }
}

MetricReport MetricReport::parse_csv(const std::string& text) {
    MetricReport report;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("metrics CSV is empty");
    }
    std::stringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');
    if (cell != "id") {
        throw ValidationError("metrics CSV header must start with 'id'");
    }
    while (std::getline(header, cell, ',')) {
        report.columns.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream row(line);
        std::string id;
        std::getline(row, id, ',');
        std::vector<double> values;
        while (std::getline(row, cell, ',')) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw ValidationError("bad number '" + cell + "' in metrics CSV");
            }
            values.push_back(v);
        }
        if (id != "mean") {
            report.add(id, std::move(values));
        }
    }
    return report;
}

MetricReport MetricReport::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read metrics CSV '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

}  // namespace ia2u::tasks
