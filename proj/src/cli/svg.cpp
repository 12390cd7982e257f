#include "taskenc/cli/svg.hpp"

#include <algorithm>
#include <cstdio>

namespace taskenc::cli {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string header(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text_at(double x, double y, const std::string& s, const char* anchor = "start") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
}

std::string color_for(double v) {
    const double t = std::clamp((v - 0.5) * 2.0, -1.0, 1.0);
    int r = 255, g = 255, b = 255;
    if (t > 0) {
        g = b = static_cast<int>(255 * (1.0 - t));
    } else {
        r = g = static_cast<int>(255 * (1.0 + t));
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

std::string line_chart_svg(const std::string& title, const std::vector<double>& x_ms,
                           const std::vector<LineSeries>& series) {
    const double W = 640, H = 360, left = 60, right = 140, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    double lo = 0.4, hi = 0.6;
    for (const auto& s : series) {
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    lo = std::max(0.0, lo - 0.02);
    hi = std::min(1.0, hi + 0.04);
    const double x0 = x_ms.empty() ? 0.0 : x_ms.front();
    const double x1 = x_ms.size() < 2 ? x0 + 1.0 : x_ms.back();
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (hi - y) / (hi - lo) * ph; };

    std::string svg = header(W, H);
    svg += text_at(W / 2, 20, title, "middle");
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(left) + "\" x2=\"" + num(left + pw) + "\" y1=\"" + num(py(0.5)) + "\" y2=\"" +
           num(py(0.5)) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = lo + (hi - lo) * i / 4.0;
        svg += text_at(left - 6, py(y) + 4, num(y), "end");
    }
    svg += text_at(left, H - 15, num(x0) + " ms");
    svg += text_at(left + pw, H - 15, num(x1) + " ms", "end");
    svg += text_at(left + pw / 2, H - 15, "window start", "middle");
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        std::string points;
        for (std::size_t i = 0; i < s.values.size() && i < x_ms.size(); ++i) {
            points += num(px(x_ms[i])) + "," + num(py(s.values[i])) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
               "\"/>\n";
        for (std::size_t i = 0; i < s.marked.size() && i < x_ms.size(); ++i) {
            if (!s.marked[i]) continue;
            svg += "<text x=\"" + num(px(x_ms[i])) + "\" y=\"" + num(top + 12 + 10 * static_cast<double>(k)) +
                   "\" fill=\"" + color + "\" text-anchor=\"middle\">*</text>\n";
        }
        const double ly = top + 14 + 16 * static_cast<double>(k);
        svg += "<line x1=\"" + num(W - right + 10) + "\" x2=\"" + num(W - right + 30) + "\" y1=\"" + num(ly - 4) +
               "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += text_at(W - right + 35, ly, s.name);
    }
    svg += "</svg>\n";
    return svg;
}

std::string heatmap_svg(const std::string& title, const std::vector<HeatmapPanel>& panels) {
    const double cell = 12, gap = 30, left = 50, top = 40;
    double width = left + 20, height = top;
    for (const auto& p : panels) {
        width = std::max(width, left + cell * static_cast<double>(p.values.cols()) + 20);
        height += cell * static_cast<double>(p.values.rows()) + gap;
    }
    std::string svg = header(std::max(width, 240.0), height + 10);
    svg += text_at(10, 20, title);
    double y = top;
    for (const auto& p : panels) {
        svg += text_at(left, y - 6, p.name);
        for (Eigen::Index r = 0; r < p.values.rows(); ++r) {
            if (r % 5 == 0) svg += text_at(left - 4, y + cell * static_cast<double>(r) + 9, std::to_string(r), "end");
            for (Eigen::Index c = 0; c < p.values.cols(); ++c) {
                svg += "<rect x=\"" + num(left + cell * static_cast<double>(c)) + "\" y=\"" +
                       num(y + cell * static_cast<double>(r)) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
                       "\" fill=\"" + color_for(p.values(r, c)) + "\"/>\n";
            }
        }
        y += cell * static_cast<double>(p.values.rows()) + gap;
    }
    svg += "</svg>\n";
    return svg;
}

std::string star_matrix_svg(const std::string& title, const std::vector<std::string>& row_labels,
                            const std::vector<std::vector<bool>>& marked) {
    const double cell = 14, left = 200, top = 40;
    std::size_t cols = 0;
    for (const auto& r : marked) cols = std::max(cols, r.size());
    std::string svg = header(left + cell * static_cast<double>(cols) + 20,
                             top + cell * static_cast<double>(marked.size()) + 20);
    svg += text_at(10, 20, title);
    for (std::size_t r = 0; r < marked.size(); ++r) {
        const double y = top + cell * static_cast<double>(r);
        if (r < row_labels.size()) svg += text_at(left - 6, y + 10, row_labels[r], "end");
        for (std::size_t c = 0; c < marked[r].size(); ++c) {
            const double x = left + cell * static_cast<double>(c);
            svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
                   "\" fill=\"none\" stroke=\"#ccc\"/>\n";
            if (marked[r][c]) svg += text_at(x + cell / 2, y + 11, "*", "middle");
        }
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace taskenc::cli
