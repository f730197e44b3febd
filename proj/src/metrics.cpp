#include "otk/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace otk {

namespace {

void append_double(std::string& line, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, res.ptr);
}

double parse_double(const std::string& field, std::size_t line_no) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw std::runtime_error("metric csv: bad number '" + field + "' on line " +
                                 std::to_string(line_no));
    return v;
}

std::uint64_t parse_u64(const std::string& field, std::size_t line_no) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw std::runtime_error("metric csv: bad integer '" + field + "' on line " +
                                 std::to_string(line_no));
    return v;
}

}  // namespace

void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
    out << kMetricCsvHeader << '\n';
    std::string line;
    for (const auto& r : rows) {
        line.clear();
        line += std::to_string(r.run_id);
        line += ',';
        line += std::to_string(r.t);
        line += ',';
        append_double(line, r.elapsed_seconds);
        line += ',';
        append_double(line, r.stk);
        line += ',';
        append_double(line, r.precision_at_k);
        line += ',';
        line += r.mode;
        line += ',';
        append_double(line, r.overhead_seconds);
        line += '\n';
        out << line;
    }
}

std::vector<MetricRow> read_metric_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("metric csv: empty input");
    if (line != kMetricCsvHeader)
        throw std::runtime_error("metric csv: unexpected header '" + line + "'");

    std::vector<MetricRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find(',', start);
            if (pos == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        if (fields.size() != 7)
            throw std::runtime_error("metric csv: expected 7 fields on line " +
                                     std::to_string(line_no));
        MetricRow r;
        r.run_id = parse_u64(fields[0], line_no);
        r.t = parse_u64(fields[1], line_no);
        r.elapsed_seconds = parse_double(fields[2], line_no);
        r.stk = parse_double(fields[3], line_no);
        r.precision_at_k = parse_double(fields[4], line_no);
        r.mode = fields[5];
        r.overhead_seconds = parse_double(fields[6], line_no);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::set<ElementId> ground_truth_top_k(const ScoreTable& table, std::size_t k) {
    std::vector<const ScoredElement*> sorted;
    sorted.reserve(table.size());
    for (const auto& e : table) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const ScoredElement* a, const ScoredElement* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->id < b->id;
    });
    std::set<ElementId> out;
    for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i) out.insert(sorted[i]->id);
    return out;
}

double precision_at_k(const TopKSolution& solution, const std::set<ElementId>& ground_truth,
                      std::size_t k) {
    if (k == 0) throw std::invalid_argument("precision_at_k: k must be positive");
    std::size_t hits = 0;
    for (const auto& [score, id] : solution.entries())
        if (ground_truth.count(id)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace otk
