#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lanecast/core/csv.hpp"
#include "lanecast/core/errors.hpp"
#include "lanecast/core/labels.hpp"
#include "lanecast/pipeline.hpp"

// Renders the persisted sweep results into CSV tables and SVG charts.  This
// module never recomputes anything: every number comes out of the result
// files, so reports can be regenerated without retraining.

namespace lanecast {

struct ResultRow {
    std::string arch;
    double obs_window_s = 0.0;
    double max_pred_time_s = 0.0;
    double train_accuracy_pct = 0.0;
    double test_accuracy_pct = 0.0;
    double delta_acc_pct = 0.0;
    std::array<double, kClassCount> f1_pct{};
    std::array<std::array<std::int64_t, kClassCount>, kClassCount> confusion{};
    PredictionTimeHistogram histogram;
};

inline ResultRow result_row_from_json(const nlohmann::json& j) {
    ResultRow r;
    r.arch = j.at("architecture").get<std::string>();
    r.obs_window_s = j.at("obs_window_s").get<double>();
    r.max_pred_time_s = j.at("max_pred_time_s").get<double>();
    r.train_accuracy_pct = j.at("train_accuracy_pct").get<double>();
    r.test_accuracy_pct = j.at("test_accuracy_pct").get<double>();
    r.delta_acc_pct = j.at("delta_acc_pct").get<double>();
    for (int c = 0; c < kClassCount; ++c)
        r.f1_pct[static_cast<std::size_t>(c)] =
            j.at("per_class").at(to_string(static_cast<Label>(c))).at("f1_pct").get<double>();
    const auto& cj = j.at("test_confusion");
    for (int a = 0; a < kClassCount; ++a)
        for (int b = 0; b < kClassCount; ++b)
            r.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                cj[a][b].get<std::int64_t>();
    const auto& h = j.at("prediction_time_histogram");
    r.histogram.bin_width_s = h.at("bin_width_s").get<double>();
    r.histogram.bin_start = h.at("bin_start").get<std::vector<double>>();
    r.histogram.bin_end = h.at("bin_end").get<std::vector<double>>();
    r.histogram.total = h.at("total").get<std::vector<std::int64_t>>();
    r.histogram.correct = h.at("correct").get<std::vector<std::int64_t>>();
    return r;
}

inline std::vector<ResultRow> load_results(const std::string& results_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (!fs::is_directory(results_dir)) throw IoError(results_dir + " is not a directory");
    for (const auto& entry : fs::directory_iterator(results_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("result_", 0) == 0 && name.size() > 5 &&
            name.substr(name.size() - 5) == ".json")
            files.push_back(entry.path().string());
    }
    if (files.empty()) throw EmptyInput("no result files in " + results_dir);
    std::sort(files.begin(), files.end());
    std::vector<ResultRow> rows;
    for (const auto& f : files) rows.push_back(result_row_from_json(pipeline_detail::read_json_file(f)));
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.arch != b.arch) return a.arch < b.arch;
        if (a.obs_window_s != b.obs_window_s) return a.obs_window_s < b.obs_window_s;
        return a.max_pred_time_s < b.max_pred_time_s;
    });
    return rows;
}

namespace report_detail {

inline const std::array<std::string, 9>& palette() {
    static const std::array<std::string, 9> colors = {
        "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
        "#edc948", "#b07aa1", "#9c755f", "#bab0ac"};
    return colors;
}

inline std::string svg_num(double v) {
    return format_double(std::round(v * 100.0) / 100.0);
}

inline double nice_ceil(double v) {
    if (v <= 0.0) return 1.0;
    const double mag = std::pow(10.0, std::floor(std::log10(v)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= v) return m * mag;
    return 10.0 * mag;
}

class SvgCanvas {
  public:
    SvgCanvas(double width, double height) : w_(width), h_(height) {
        buf_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << svg_num(w_) << ' '
             << svg_num(h_) << "\" width=\"" << svg_num(w_) << "\" height=\"" << svg_num(h_)
             << "\" font-family=\"sans-serif\">\n";
        buf_ << "<rect x=\"0\" y=\"0\" width=\"" << svg_num(w_) << "\" height=\"" << svg_num(h_)
             << "\" fill=\"#ffffff\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0, bool dashed = false) {
        buf_ << "<line x1=\"" << svg_num(x1) << "\" y1=\"" << svg_num(y1) << "\" x2=\""
             << svg_num(x2) << "\" y2=\"" << svg_num(y2) << "\" stroke=\"" << stroke
             << "\" stroke-width=\"" << svg_num(width) << "\"";
        if (dashed) buf_ << " stroke-dasharray=\"5 4\"";
        buf_ << "/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill) {
        buf_ << "<rect x=\"" << svg_num(x) << "\" y=\"" << svg_num(y) << "\" width=\"" << svg_num(w)
             << "\" height=\"" << svg_num(h) << "\" fill=\"" << fill << "\"/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& fill) {
        buf_ << "<circle cx=\"" << svg_num(cx) << "\" cy=\"" << svg_num(cy) << "\" r=\""
             << svg_num(r) << "\" fill=\"" << fill << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        buf_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) buf_ << ' ';
            buf_ << svg_num(pts[i].first) << ',' << svg_num(pts[i].second);
        }
        buf_ << "\"/>\n";
    }

    // anchor: start, middle or end
    void text(double x, double y, const std::string& s, double size = 12.0,
              const std::string& anchor = "start", const std::string& fill = "#333333",
              const std::string& transform = "") {
        buf_ << "<text x=\"" << svg_num(x) << "\" y=\"" << svg_num(y) << "\" font-size=\""
             << svg_num(size) << "\" text-anchor=\"" << anchor << "\" fill=\"" << fill << "\"";
        if (!transform.empty()) buf_ << " transform=\"" << transform << "\"";
        buf_ << '>' << s << "</text>\n";
    }

    std::string finish() {
        buf_ << "</svg>\n";
        return buf_.str();
    }

  private:
    double w_, h_;
    std::ostringstream buf_;
};

struct Series {
    std::string name;
    std::string color;
    std::vector<std::pair<double, double>> points;  // data coordinates
};

// Shared line-chart scaffolding: axes, grid, legend, one polyline plus
// markers per series.
inline std::string line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<Series>& series,
                              double y_min, double y_max) {
    const double width = 800.0, height = 500.0;
    const double ml = 70.0, mr = 150.0, mt = 50.0, mb = 60.0;
    const double pw = width - ml - mr, ph = height - mt - mb;

    std::set<double> xs;
    for (const auto& s : series)
        for (const auto& p : s.points) xs.insert(p.first);
    if (xs.empty()) throw EmptyInput("line chart with no points");
    const double x_min = *xs.begin(), x_max = *xs.rbegin();
    auto px = [&](double x) {
        return x_max == x_min ? ml + pw / 2.0 : ml + (x - x_min) / (x_max - x_min) * pw;
    };
    auto py = [&](double y) { return mt + ph - (y - y_min) / (y_max - y_min) * ph; };

    SvgCanvas svg(width, height);
    svg.text(width / 2.0, mt - 20.0, title, 16.0, "middle", "#111111");

    const int y_ticks = 5;
    for (int i = 0; i <= y_ticks; ++i) {
        const double y = y_min + (y_max - y_min) * i / y_ticks;
        svg.line(ml, py(y), ml + pw, py(y), "#dddddd");
        svg.text(ml - 8.0, py(y) + 4.0, svg_num(y), 11.0, "end");
    }
    for (double x : xs) {
        svg.line(px(x), mt + ph, px(x), mt + ph + 5.0, "#333333");
        svg.text(px(x), mt + ph + 20.0, svg_num(x), 11.0, "middle");
    }
    svg.line(ml, mt, ml, mt + ph, "#333333");
    svg.line(ml, mt + ph, ml + pw, mt + ph, "#333333");
    if (y_min < 0.0 && y_max > 0.0) svg.line(ml, py(0.0), ml + pw, py(0.0), "#999999", 1.0, true);
    svg.text(ml + pw / 2.0, height - 15.0, x_label, 13.0, "middle");
    svg.text(20.0, mt + ph / 2.0, y_label, 13.0, "middle", "#333333",
             "rotate(-90 20 " + svg_num(mt + ph / 2.0) + ")");

    double ly = mt + 10.0;
    for (const auto& s : series) {
        svg.polyline([&] {
            std::vector<std::pair<double, double>> pts;
            for (const auto& p : s.points) pts.emplace_back(px(p.first), py(p.second));
            return pts;
        }(), s.color);
        for (const auto& p : s.points) svg.circle(px(p.first), py(p.second), 3.5, s.color);
        svg.line(ml + pw + 12.0, ly, ml + pw + 34.0, ly, s.color, 2.0);
        svg.text(ml + pw + 40.0, ly + 4.0, s.name, 12.0);
        ly += 18.0;
    }
    return svg.finish();
}

inline std::string histogram_chart(const std::string& title, const PredictionTimeHistogram& h) {
    const double width = 800.0, height = 500.0;
    const double ml = 70.0, mr = 40.0, mt = 50.0, mb = 70.0;
    const double pw = width - ml - mr, ph = height - mt - mb;
    const std::size_t n = h.total.size();
    if (n == 0) throw EmptyInput("histogram with no bins");
    std::int64_t top = 1;
    for (auto v : h.total) top = std::max(top, v);
    const double y_max = nice_ceil(static_cast<double>(top));

    SvgCanvas svg(width, height);
    svg.text(width / 2.0, mt - 20.0, title, 16.0, "middle", "#111111");
    auto py = [&](double y) { return mt + ph - y / y_max * ph; };
    const int y_ticks = 5;
    for (int i = 0; i <= y_ticks; ++i) {
        const double y = y_max * i / y_ticks;
        svg.line(ml, py(y), ml + pw, py(y), "#dddddd");
        svg.text(ml - 8.0, py(y) + 4.0, svg_num(y), 11.0, "end");
    }
    const double slot = pw / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = ml + slot * static_cast<double>(i) + slot * 0.1;
        const double bw = slot * 0.8;
        const double total_h = static_cast<double>(h.total[i]) / y_max * ph;
        const double correct_h = static_cast<double>(h.correct[i]) / y_max * ph;
        svg.rect(x0, mt + ph - total_h, bw, total_h, "#c7d5e8");
        svg.rect(x0, mt + ph - correct_h, bw, correct_h, "#4e79a7");
        svg.text(x0 + bw / 2.0, mt + ph + 16.0,
                 svg_num(h.bin_start[i]) + "-" + svg_num(h.bin_end[i]), 10.0, "middle");
    }
    svg.line(ml, mt, ml, mt + ph, "#333333");
    svg.line(ml, mt + ph, ml + pw, mt + ph, "#333333");
    svg.text(ml + pw / 2.0, height - 15.0, "prediction horizon bin [s]", 13.0, "middle");
    svg.text(20.0, mt + ph / 2.0, "samples", 13.0, "middle", "#333333",
             "rotate(-90 20 " + svg_num(mt + ph / 2.0) + ")");
    svg.rect(ml + 10.0, mt + 8.0, 14.0, 14.0, "#c7d5e8");
    svg.text(ml + 30.0, mt + 19.0, "all samples", 12.0);
    svg.rect(ml + 10.0, mt + 28.0, 14.0, 14.0, "#4e79a7");
    svg.text(ml + 30.0, mt + 39.0, "correctly classified", 12.0);
    return svg.finish();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

inline std::string cell_suffix(const ResultRow& r) {
    return r.arch + "_obs" + format_double(r.obs_window_s) + "_pred" +
           format_double(r.max_pred_time_s);
}

}  // namespace report_detail

inline void render_reports(const std::string& results_dir, const std::string& out_dir) {
    namespace rd = report_detail;
    const std::vector<ResultRow> rows = load_results(results_dir);
    std::filesystem::create_directories(out_dir);

    {
        CsvWriter w(out_dir + "/results.csv");
        w.row({"arch", "obs_window_s", "max_pred_time_s", "accuracy_pct", "delta_acc_pct",
               "f1_lk_pct", "f1_llc_pct", "f1_rlc_pct"});
        for (const auto& r : rows)
            w.row({r.arch, format_double(r.obs_window_s), format_double(r.max_pred_time_s),
                   format_double(r.test_accuracy_pct), format_double(r.delta_acc_pct),
                   format_double(r.f1_pct[0]), format_double(r.f1_pct[1]),
                   format_double(r.f1_pct[2])});
    }

    for (const auto& r : rows) {
        {
            CsvWriter w(out_dir + "/confusion_" + rd::cell_suffix(r) + ".csv");
            w.row({"true_class", "pred_LK", "pred_LLC", "pred_RLC"});
            for (int a = 0; a < kClassCount; ++a) {
                std::vector<std::string> cells{to_string(static_cast<Label>(a))};
                for (int b = 0; b < kClassCount; ++b)
                    cells.push_back(std::to_string(
                        r.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]));
                w.row(cells);
            }
        }
        if (!r.histogram.total.empty()) {
            CsvWriter w(out_dir + "/hist_" + rd::cell_suffix(r) + ".csv");
            w.row({"bin_start", "bin_end", "total", "correct"});
            for (std::size_t i = 0; i < r.histogram.total.size(); ++i)
                w.row({format_double(r.histogram.bin_start[i]),
                       format_double(r.histogram.bin_end[i]), std::to_string(r.histogram.total[i]),
                       std::to_string(r.histogram.correct[i])});
            rd::write_text_file(
                out_dir + "/hist_" + rd::cell_suffix(r) + ".svg",
                rd::histogram_chart("correct classifications by prediction horizon, " + r.arch +
                                        ", " + format_double(r.obs_window_s) + "s window, up to " +
                                        format_double(r.max_pred_time_s) + "s ahead",
                                    r.histogram));
        }
    }

    // per observation window: test accuracy and train-test gap vs horizon
    std::set<double> obs_values;
    for (const auto& r : rows) obs_values.insert(r.obs_window_s);
    for (double obs : obs_values) {
        std::map<std::string, std::vector<const ResultRow*>> by_arch;
        for (const auto& r : rows)
            if (r.obs_window_s == obs) by_arch[r.arch].push_back(&r);

        std::vector<rd::Series> acc_series, gap_series;
        std::size_t color = 0;
        double gap_lo = 0.0, gap_hi = 0.0;
        for (const auto& [arch, cell_rows] : by_arch) {
            rd::Series acc{arch, rd::palette()[color % rd::palette().size()], {}};
            rd::Series gap = acc;
            for (const ResultRow* r : cell_rows) {
                acc.points.emplace_back(r->max_pred_time_s, r->test_accuracy_pct);
                gap.points.emplace_back(r->max_pred_time_s, r->delta_acc_pct);
                gap_lo = std::min(gap_lo, r->delta_acc_pct);
                gap_hi = std::max(gap_hi, r->delta_acc_pct);
            }
            acc_series.push_back(std::move(acc));
            gap_series.push_back(std::move(gap));
            ++color;
        }
        const std::string obs_txt = format_double(obs);
        rd::write_text_file(out_dir + "/accuracy_obs" + obs_txt + ".svg",
                            rd::line_chart("test accuracy, " + obs_txt + "s observation window",
                                           "maximum prediction horizon [s]", "accuracy [%]",
                                           acc_series, 0.0, 100.0));
        rd::write_text_file(
            out_dir + "/generalization_gap_obs" + obs_txt + ".svg",
            rd::line_chart("train minus test accuracy, " + obs_txt + "s observation window",
                           "maximum prediction horizon [s]", "accuracy gap [pp]", gap_series,
                           gap_lo < 0.0 ? -rd::nice_ceil(-gap_lo) : 0.0,
                           rd::nice_ceil(std::max(gap_hi, 1.0))));
    }
}

}  // namespace lanecast
