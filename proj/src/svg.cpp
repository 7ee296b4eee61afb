#include "bellsim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bellsim {

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string px(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v)
    {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void settle()
    {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

} // namespace

std::string render_svg(const Plot& plot, int width, int height)
{
    const double left = 70, right = 20, top = 36, bottom = 48;
    const double w = width - left - right;
    const double h = height - top - bottom;

    Range xr, yr;
    for (const Series& s : plot.series) {
        for (double v : s.x) {
            xr.add(v);
        }
        for (double v : s.y) {
            yr.add(v);
        }
    }
    xr.settle();
    yr.settle();
    auto sx = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * w; };
    auto sy = [&](double y) { return top + h - (y - yr.lo) / (yr.hi - yr.lo) * h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << px(left + w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(plot.title) << "</text>\n";
    out << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(w) << "\" height=\"" << px(h)
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Range labels at the corners of the axis box.
    out << "<text x=\"" << px(left) << "\" y=\"" << px(top + h + 16) << "\" text-anchor=\"middle\">" << num(xr.lo)
        << "</text>\n";
    out << "<text x=\"" << px(left + w) << "\" y=\"" << px(top + h + 16) << "\" text-anchor=\"middle\">"
        << num(xr.hi) << "</text>\n";
    out << "<text x=\"" << px(left - 6) << "\" y=\"" << px(top + h) << "\" text-anchor=\"end\">" << num(yr.lo)
        << "</text>\n";
    out << "<text x=\"" << px(left - 6) << "\" y=\"" << px(top + 10) << "\" text-anchor=\"end\">" << num(yr.hi)
        << "</text>\n";
    out << "<text x=\"" << px(left + w / 2) << "\" y=\"" << px(height - 10.0) << "\" text-anchor=\"middle\">"
        << escape(plot.x_label) << "</text>\n";
    out << "<text transform=\"translate(16," << px(top + h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(plot.y_label) << "</text>\n";

    std::size_t legend = 0;
    for (const Series& s : plot.series) {
        if (s.x.size() != s.y.size()) {
            throw std::invalid_argument("render_svg: series '" + s.label + "' has mismatched x and y");
        }
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                out << px(sx(s.x[i])) << ',' << px(sy(s.y[i])) << ' ';
            }
        }
        out << "\"/>\n";
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                    out << "<circle cx=\"" << px(sx(s.x[i])) << "\" cy=\"" << px(sy(s.y[i])) << "\" r=\"2.5\" fill=\""
                        << s.color << "\"/>\n";
                }
            }
        }
        if (!s.label.empty() && legend < plot.legend_limit) {
            const double y = top + 14 + 16.0 * static_cast<double>(legend);
            out << "<line x1=\"" << px(left + w - 130) << "\" y1=\"" << px(y - 4) << "\" x2=\"" << px(left + w - 110)
                << "\" y2=\"" << px(y - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
            out << "<text x=\"" << px(left + w - 104) << "\" y=\"" << px(y) << "\">" << escape(s.label)
                << "</text>\n";
            ++legend;
        }
    }
    out << "</svg>\n";
    return out.str();
}

void write_svg(const std::filesystem::path& path, const Plot& plot)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << render_svg(plot);
}

} // namespace bellsim
