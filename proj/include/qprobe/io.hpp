#pragma once
// Structured input/output: line-oriented sectioned config files, CSV with
// round-trip-safe formatting, JSON manifests, and minimal SVG quick-looks.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace qprobe {

inline constexpr const char* tool_version = "1.0.0";

// 17 significant digits: enough for exact double round trips.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --------------------------------------------------------------------------
// CSV

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_csv: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw contract_error("write_csv: row width does not match header in " + path);
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
    if (!out) throw io_error("write_csv: write failure on " + path);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw io_error("CsvTable: no column named " + name);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("read_csv: cannot open " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            table.header = cells;
            first = false;
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            try {
                row.push_back(std::stod(c));
            } catch (const std::exception&) {
                throw io_error("read_csv: non-numeric cell '" + c + "' in " + path);
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (first) throw io_error("read_csv: empty file " + path);
    return table;
}

// --------------------------------------------------------------------------
// Config files: [section] headers, key = value lines, # or ; comments.
// Reads mark keys as consumed; defaults are materialized into the document so
// the manifest can echo the fully resolved configuration. reject_unknown()
// enforces the schema by refusing any key no task ever asked for.

struct IniDocument {
    std::map<std::string, std::map<std::string, std::string>> sections;
    mutable std::set<std::string> consumed;

    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    bool has(const std::string& section, const std::string& key) const {
        auto it = sections.find(section);
        return it != sections.end() && it->second.count(key) > 0;
    }

    // value if present, otherwise materialize the default
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) {
        consumed.insert(section + "." + key);
        auto& sec = sections[section];
        auto it = sec.find(key);
        if (it == sec.end()) {
            sec[key] = fallback;
            return fallback;
        }
        return it->second;
    }

    std::string require(const std::string& section, const std::string& key) {
        consumed.insert(section + "." + key);
        if (!has(section, key))
            throw contract_error("config: missing required key [" + section + "] " + key);
        return sections.at(section).at(key);
    }

    double get_double(const std::string& section, const std::string& key, double fallback) {
        return parse_double(get(section, key, format_double(fallback)), section, key);
    }

    double require_double(const std::string& section, const std::string& key) {
        return parse_double(require(section, key), section, key);
    }

    long get_int(const std::string& section, const std::string& key, long fallback) {
        return parse_int(get(section, key, std::to_string(fallback)), section, key);
    }

    long require_int(const std::string& section, const std::string& key) {
        return parse_int(require(section, key), section, key);
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) {
        std::string v = get(section, key, fallback ? "true" : "false");
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw contract_error("config: [" + section + "] " + key + " must be a boolean, got " + v);
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        const std::string& fallback) {
        std::string v = get(section, key, fallback);
        std::vector<double> out;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            out.push_back(parse_double(item, section, key));
        }
        return out;
    }

    void reject_unknown() const {
        for (const auto& [section, keys] : sections)
            for (const auto& [key, value] : keys)
                if (!consumed.count(section + "." + key))
                    throw contract_error("config: unknown key [" + section + "] " + key);
    }

private:
    static double parse_double(const std::string& v, const std::string& section,
                               const std::string& key) {
        try {
            std::size_t pos = 0;
            double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw contract_error("config: [" + section + "] " + key + " must be numeric, got " + v);
        }
    }

    static long parse_int(const std::string& v, const std::string& section,
                          const std::string& key) {
        try {
            std::size_t pos = 0;
            long i = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return i;
        } catch (const std::exception&) {
            throw contract_error("config: [" + section + "] " + key + " must be an integer, got " +
                                 v);
        }
    }
};

inline IniDocument parse_ini(const std::string& text, const std::string& origin = "<string>") {
    IniDocument doc;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = IniDocument::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw io_error(origin + ":" + std::to_string(lineno) + ": malformed section header");
            section = IniDocument::trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw io_error(origin + ":" + std::to_string(lineno) + ": empty section name");
            doc.sections[section]; // materialize even if empty
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw io_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = IniDocument::trim(line.substr(0, eq));
        std::string value = IniDocument::trim(line.substr(eq + 1));
        if (key.empty())
            throw io_error(origin + ":" + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw io_error(origin + ":" + std::to_string(lineno) + ": key outside any section");
        if (doc.sections[section].count(key))
            throw io_error(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
        doc.sections[section][key] = value;
    }
    return doc;
}

inline IniDocument load_ini(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_ini: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_ini(ss.str(), path);
}

// --------------------------------------------------------------------------
// Config hash: FNV-1a over the canonical (sorted, normalized) key=value list.

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string config_hash(const IniDocument& doc) {
    std::string canon;
    for (const auto& [section, keys] : doc.sections)
        for (const auto& [key, value] : keys)
            canon += section + "." + key + "=" + value + "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon)));
    return buf;
}

inline nlohmann::ordered_json config_json(const IniDocument& doc) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [section, keys] : doc.sections) {
        nlohmann::ordered_json sec = nlohmann::ordered_json::object();
        for (const auto& [key, value] : keys) sec[key] = value;
        j[section] = sec;
    }
    return j;
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_text: cannot open " + path);
    out << content;
    if (!out) throw io_error("write_text: write failure on " + path);
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

// --------------------------------------------------------------------------
// SVG quick-looks: a line plot and a heat map, both self-contained.

namespace detail {
inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}
} // namespace detail

inline void svg_line_plot(const std::string& path, const std::vector<double>& x,
                          const std::vector<double>& y, const std::string& title = "",
                          const std::string& x_label = "", const std::string& y_label = "") {
    if (x.size() != y.size()) throw contract_error("svg_line_plot: size mismatch");
    const double w = 720, h = 460, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (!x.empty()) {
        xmin = *std::min_element(x.begin(), x.end());
        xmax = *std::max_element(x.begin(), x.end());
        ymin = *std::min_element(y.begin(), y.end());
        ymax = *std::max_element(y.begin(), y.end());
        if (xmax == xmin) xmax = xmin + 1;
        if (ymax == ymin) ymax = ymin + 1;
    }
    auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double v) { return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double fx = xmin + (xmax - xmin) * i / 4.0;
        double fy = ymin + (ymax - ymin) * i / 4.0;
        s << "<text x=\"" << px(fx) << "\" y=\"" << h - mb + 18
          << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::svg_num(fx) << "</text>\n";
        s << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
          << "\" font-size=\"11\" text-anchor=\"end\">" << detail::svg_num(fy) << "</text>\n";
    }
    if (!x.empty()) {
        s << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            s << detail::svg_num(px(x[i])) << "," << detail::svg_num(py(y[i])) << " ";
        s << "\"/>\n";
    }
    if (!title.empty())
        s << "<text x=\"" << w / 2 << "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">"
          << title << "</text>\n";
    if (!x_label.empty())
        s << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
          << "\" font-size=\"12\" text-anchor=\"middle\">" << x_label << "</text>\n";
    if (!y_label.empty())
        s << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
          << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
          << (mt + h - mb) / 2 << ")\">" << y_label << "</text>\n";
    s << "</svg>\n";
    write_text(path, s.str());
}

// values[row][col]; row_values label the vertical axis, col_values the horizontal.
inline void svg_heatmap(const std::string& path, const std::vector<double>& col_values,
                        const std::vector<double>& row_values,
                        const std::vector<std::vector<double>>& values,
                        const std::string& title = "") {
    if (values.size() != row_values.size())
        throw contract_error("svg_heatmap: row count mismatch");
    for (const auto& row : values)
        if (row.size() != col_values.size())
            throw contract_error("svg_heatmap: column count mismatch");
    if (values.empty() || col_values.empty())
        throw contract_error("svg_heatmap: need a non-empty 2D matrix");

    double vmin = values[0][0], vmax = values[0][0];
    for (const auto& row : values)
        for (double v : row) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    if (vmax == vmin) vmax = vmin + 1;

    const double w = 720, h = 460, ml = 70, mr = 20, mt = 40, mb = 50;
    double cw = (w - ml - mr) / static_cast<double>(col_values.size());
    double ch = (h - mt - mb) / static_cast<double>(row_values.size());

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t r = 0; r < values.size(); ++r) {
        for (std::size_t c = 0; c < values[r].size(); ++c) {
            double t = (values[r][c] - vmin) / (vmax - vmin);
            int red = static_cast<int>(255 * t);
            int green = static_cast<int>(255 * std::pow(t, 0.6));
            int blue = static_cast<int>(200 * (1.0 - t) + 55);
            s << "<rect x=\"" << detail::svg_num(ml + static_cast<double>(c) * cw) << "\" y=\""
              << detail::svg_num(h - mb - static_cast<double>(r + 1) * ch) << "\" width=\""
              << detail::svg_num(cw + 0.5) << "\" height=\"" << detail::svg_num(ch + 0.5)
              << "\" fill=\"rgb(" << red << "," << green << "," << blue << ")\"/>\n";
        }
    }
    if (!title.empty())
        s << "<text x=\"" << w / 2 << "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">"
          << title << "</text>\n";
    s << "<text x=\"" << w / 2 << "\" y=\"" << h - 12
      << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::svg_num(col_values.front())
      << " .. " << detail::svg_num(col_values.back()) << "</text>\n";
    s << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" font-size=\"11\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 16 " << (mt + h - mb) / 2 << ")\">"
      << detail::svg_num(row_values.front()) << " .. " << detail::svg_num(row_values.back())
      << "</text>\n";
    s << "</svg>\n";
    write_text(path, s.str());
}

} // namespace qprobe
