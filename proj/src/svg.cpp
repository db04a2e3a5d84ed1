#include "cipherprint/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cipherprint::svg {

namespace {

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string header(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w, 0) + "\" height=\"" + num(h, 0) +
           "\" viewBox=\"0 0 " + num(w, 0) + " " + num(h, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const std::string& anchor = "start",
                 const std::string& extra = "") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\"" + extra + ">" + esc(s) +
           "</text>\n";
}

}  // namespace

std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::vector<std::vector<double>>& values,
                    const std::string& value_format_suffix) {
    const double cell = 70.0, left = 130.0, top = 60.0;
    const double w = left + cell * static_cast<double>(col_labels.size()) + 20.0;
    const double h = top + cell * static_cast<double>(row_labels.size()) + 30.0;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& row : values) {
        for (double v : row) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (!(hi > lo)) hi = lo + 1.0;
    std::string out = header(w, h);
    out += text(w / 2, 22, title, "middle", " font-size=\"14\"");
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
        out += text(left + cell * (static_cast<double>(c) + 0.5), top - 8, col_labels[c], "middle");
    }
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        const double y = top + cell * static_cast<double>(r);
        out += text(left - 8, y + cell / 2 + 4, row_labels[r], "end");
        for (std::size_t c = 0; c < col_labels.size(); ++c) {
            const double v = values[r][c];
            const double x = left + cell * static_cast<double>(c);
            std::string fill = "#cccccc";
            std::string ink = "black";
            if (std::isfinite(v)) {
                const double t = (v - lo) / (hi - lo);
                const int red = static_cast<int>(std::lround(255 - 215 * t));
                const int green = static_cast<int>(std::lround(255 - 175 * t));
                char buf[16];
                std::snprintf(buf, sizeof(buf), "#%02x%02xff", red, green);
                fill = buf;
                if (t > 0.6) ink = "white";
            }
            out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" +
                   num(cell) + "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
            out += text(x + cell / 2, y + cell / 2 + 4, std::isfinite(v) ? num(v) + value_format_suffix : "n/a",
                        "middle", " fill=\"" + ink + "\"");
        }
    }
    return out + "</svg>\n";
}

std::string ridgeline(const std::string& title, const std::vector<Ridge>& ridges) {
    const double left = 130.0, top = 50.0, width = 420.0, band = 70.0;
    const double w = left + width + 30.0;
    const double h = top + band * static_cast<double>(ridges.size()) + 50.0;
    double peak = 0.0;
    for (const auto& r : ridges) {
        for (const auto& c : r.thin) peak = std::max(peak, *std::max_element(c.begin(), c.end()));
        if (!r.mean.empty()) peak = std::max(peak, *std::max_element(r.mean.begin(), r.mean.end()));
    }
    if (peak <= 0) peak = 1;
    auto path = [&](const std::vector<double>& curve, double base) {
        std::string d;
        const double K = static_cast<double>(curve.size());
        for (std::size_t b = 0; b < curve.size(); ++b) {
            const double x = left + width * (static_cast<double>(b) + 0.5) / K;
            const double y = base - 1.3 * band * curve[b] / peak;
            d += (b ? " L" : "M") + num(x) + " " + num(y);
        }
        return d;
    };
    std::string out = header(w, h);
    out += text(w / 2, 22, title, "middle", " font-size=\"14\"");
    for (std::size_t i = 0; i < ridges.size(); ++i) {
        const double base = top + band * static_cast<double>(i + 1);
        out += text(left - 8, base - 4, ridges[i].label, "end");
        out += "<line x1=\"" + num(left) + "\" y1=\"" + num(base) + "\" x2=\"" + num(left + width) + "\" y2=\"" +
               num(base) + "\" stroke=\"#999\"/>\n";
        for (const auto& c : ridges[i].thin) {
            out += "<path d=\"" + path(c, base) + "\" fill=\"none\" stroke=\"#7aa6d8\" stroke-width=\"0.6\" opacity=\"0.6\"/>\n";
        }
        if (!ridges[i].mean.empty()) {
            out += "<path d=\"" + path(ridges[i].mean, base) + "\" fill=\"none\" stroke=\"#1f3f7a\" stroke-width=\"2\"/>\n";
        }
    }
    const double axis = top + band * static_cast<double>(ridges.size()) + 20.0;
    for (int t = 0; t <= 4; ++t) out += text(left + width * t / 4.0, axis, num(t / 4.0), "middle");
    out += text(left + width / 2, axis + 18, "calibrated score", "middle");
    return out + "</svg>\n";
}

}  // namespace cipherprint::svg
