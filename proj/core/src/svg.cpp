#include "evergreen/svg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace evergreen {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), result.ptr);
}

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

std::string px(double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v;
    return s.str();
}

double nice_step(double span, int target) {
    const double raw = span / target;
    const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * magnitude >= raw) return m * magnitude;
    return 10.0 * magnitude;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double pad = 0.04 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

std::string tick_label(double v, double step) {
    if (std::abs(v) < step * 1e-9) v = 0.0;
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    Range xr, yr;
    for (const auto& s : spec.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                xr.add(s.x[i]);
                yr.add(s.y[i]);
            }
    }
    if (spec.diagonal) {
        const double lo = std::min(xr.lo, yr.lo), hi = std::max(xr.hi, yr.hi);
        xr.add(lo), xr.add(hi), yr.add(lo), yr.add(hi);
    }
    xr.settle();
    yr.settle();

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto sy = [&](double y) { return kTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << px(kLeft + plot_w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(spec.title) << "</text>\n";

    // Axes
    const double x0 = kLeft, y0 = kTop + plot_h;
    out << "<line x1=\"" << px(x0) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(x0 + plot_w) << "\" y2=\"" << px(y0)
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px(x0) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(x0) << "\" y2=\"" << px(y0)
        << "\" stroke=\"black\"/>\n";
    const double xstep = nice_step(xr.hi - xr.lo, 6);
    for (double v = std::ceil(xr.lo / xstep) * xstep; v <= xr.hi + 1e-9 * xstep; v += xstep) {
        out << "<line x1=\"" << px(sx(v)) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(sx(v)) << "\" y2=\"" << px(y0 + 5)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(sx(v)) << "\" y=\"" << px(y0 + 18) << "\" text-anchor=\"middle\">"
            << tick_label(v, xstep) << "</text>\n";
    }
    const double ystep = nice_step(yr.hi - yr.lo, 5);
    for (double v = std::ceil(yr.lo / ystep) * ystep; v <= yr.hi + 1e-9 * ystep; v += ystep) {
        out << "<line x1=\"" << px(x0 - 5) << "\" y1=\"" << px(sy(v)) << "\" x2=\"" << px(x0) << "\" y2=\"" << px(sy(v))
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(x0 - 8) << "\" y=\"" << px(sy(v) + 4) << "\" text-anchor=\"end\">"
            << tick_label(v, ystep) << "</text>\n";
    }
    out << "<text x=\"" << px(kLeft + plot_w / 2) << "\" y=\"" << px(kHeight - 10) << "\" text-anchor=\"middle\">"
        << escape(spec.x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << px(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << px(kTop + plot_h / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

    if (spec.diagonal) {
        const double lo = std::max(xr.lo, yr.lo), hi = std::min(xr.hi, yr.hi);
        out << "<line x1=\"" << px(sx(lo)) << "\" y1=\"" << px(sy(lo)) << "\" x2=\"" << px(sx(hi)) << "\" y2=\""
            << px(sy(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    }

    for (std::size_t k = 0; k < spec.series.size(); ++k) {
        const Series& s = spec.series[k];
        const char* color = kPalette[k % kPalette.size()];
        if (s.style == Series::Style::line) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                out << (first ? "" : " ") << px(sx(s.x[i])) << ',' << px(sy(s.y[i]));
                first = false;
            }
            out << "\"/>\n";
        } else {
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                out << "<circle cx=\"" << px(sx(s.x[i])) << "\" cy=\"" << px(sy(s.y[i])) << "\" r=\"1.6\" fill=\""
                    << color << "\" fill-opacity=\"0.6\"/>\n";
            }
        }
    }

    if (spec.legend) {
        const double lx = kWidth - kRight + 12;
        for (std::size_t k = 0; k < spec.series.size(); ++k) {
            const double ly = kTop + 8 + 18.0 * static_cast<double>(k);
            out << "<rect x=\"" << px(lx) << "\" y=\"" << px(ly - 8) << "\" width=\"14\" height=\"10\" fill=\""
                << kPalette[k % kPalette.size()] << "\"/>\n";
            out << "<text x=\"" << px(lx + 20) << "\" y=\"" << px(ly + 1) << "\">" << escape(spec.series[k].name)
                << "</text>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace evergreen
