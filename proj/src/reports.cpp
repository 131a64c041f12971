#include "updm/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace updm {

using nlohmann::json;

std::string format_double(double v) {
    // shortest representation that round-trips exactly
    for (int prec = 1; prec <= 17; ++prec) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    return "0";
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

const char* kPalette[] = {"#4063d8", "#d84040", "#3fa34d", "#a040d8", "#d8a040",
                          "#40c8d8", "#d840a8", "#808080", "#506050", "#203040"};

}  // namespace

std::string matrix_to_csv(const TransferMatrix& m) {
    std::string out = "attack";
    for (const auto& id : m.models) out += "," + csv_escape(id);
    out += ",average\n";
    for (std::size_t r = 0; r < m.attacks.size(); ++r) {
        out += csv_escape(m.attacks[r]);
        for (double v : m.cells[r]) out += "," + format_double(v);
        out += "," + format_double(m.row_average[r]) + "\n";
    }
    return out;
}

TransferMatrix matrix_from_csv(const std::string& text) {
    TransferMatrix m;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("updm: empty transfer-matrix CSV");
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header.front() != "attack" || header.back() != "average") {
        throw std::runtime_error("updm: malformed transfer-matrix CSV header");
    }
    m.models.assign(header.begin() + 1, header.end() - 1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error("updm: transfer-matrix CSV row width mismatch");
        }
        m.attacks.push_back(fields.front());
        std::vector<double> cells;
        for (std::size_t i = 1; i + 1 < fields.size(); ++i) cells.push_back(std::stod(fields[i]));
        m.cells.push_back(std::move(cells));
        m.row_average.push_back(std::stod(fields.back()));
    }
    return m;
}

std::string matrix_to_json(const TransferMatrix& m) {
    json j;
    j["models"] = m.models;
    j["samples_per_cell"] = m.samples_per_cell;
    json rows = json::array();
    for (std::size_t r = 0; r < m.attacks.size(); ++r) {
        json row;
        row["attack"] = m.attacks[r];
        row["cells"] = m.cells[r];
        row["average"] = m.row_average[r];
        rows.push_back(row);
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

std::string atlas_to_csv(const AtlasReport& a) {
    std::string out = "label,x,y\n";
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        out += csv_escape(a.labels[i]) + "," + format_double(a.coords[i][0]) + "," +
               format_double(a.coords[i][1]) + "\n";
    }
    return out;
}

std::string atlas_to_json(const AtlasReport& a) {
    json j;
    json pts = json::array();
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        pts.push_back({{"label", a.labels[i]}, {"x", a.coords[i][0]}, {"y", a.coords[i][1]}});
    }
    j["points"] = pts;
    if (a.mean_silhouette) j["mean_silhouette"] = *a.mean_silhouette;
    else j["mean_silhouette"] = nullptr;
    j["label_spread"] = a.label_spread;
    j["component1"] = a.component1;
    j["component2"] = a.component2;
    return j.dump(2) + "\n";
}

namespace {

struct SvgFrame {
    double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
    static constexpr double kSize = 480.0;
    static constexpr double kPad = 48.0;

    double px(double x) const {
        const double span = max_x - min_x;
        return kPad + (span == 0.0 ? 0.5 : (x - min_x) / span) * (kSize - 2 * kPad);
    }
    double py(double y) const {
        const double span = max_y - min_y;
        return kSize - kPad - (span == 0.0 ? 0.5 : (y - min_y) / span) * (kSize - 2 * kPad);
    }
};

std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string svg_open() {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"480\" "
           "height=\"480\" viewBox=\"0 0 480 480\">\n"
           "<rect width=\"480\" height=\"480\" fill=\"#ffffff\"/>\n";
}

}  // namespace

std::string atlas_to_svg(const AtlasReport& a) {
    SvgFrame f;
    if (!a.coords.empty()) {
        f.min_x = f.max_x = a.coords[0][0];
        f.min_y = f.max_y = a.coords[0][1];
        for (const auto& c : a.coords) {
            f.min_x = std::min(f.min_x, c[0]);
            f.max_x = std::max(f.max_x, c[0]);
            f.min_y = std::min(f.min_y, c[1]);
            f.max_y = std::max(f.max_y, c[1]);
        }
    }
    std::vector<std::string> distinct;
    for (const auto& l : a.labels) {
        bool seen = false;
        for (const auto& d : distinct) seen = seen || d == l;
        if (!seen) distinct.push_back(l);
    }
    auto color_of = [&](const std::string& label) {
        for (std::size_t i = 0; i < distinct.size(); ++i) {
            if (distinct[i] == label) return kPalette[i % 10];
        }
        return kPalette[9];
    };

    std::string out = svg_open();
    for (std::size_t i = 0; i < distinct.size(); ++i) {
        out += "<circle cx=\"16\" cy=\"" + svg_num(16.0 + 16.0 * i) +
               "\" r=\"4\" fill=\"" + color_of(distinct[i]) + "\"/>\n";
        out += "<text x=\"26\" y=\"" + svg_num(20.0 + 16.0 * i) +
               "\" font-size=\"10\" font-family=\"sans-serif\">" + distinct[i] + "</text>\n";
    }
    for (std::size_t i = 0; i < a.coords.size(); ++i) {
        out += "<circle cx=\"" + svg_num(f.px(a.coords[i][0])) + "\" cy=\"" +
               svg_num(f.py(a.coords[i][1])) + "\" r=\"3\" fill=\"" + color_of(a.labels[i]) +
               "\" fill-opacity=\"0.75\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string ablation_to_csv(const AblationTrace& t) {
    std::string out = "variant,epoch,model,accuracy,mean_probability\n";
    auto emit = [&](const char* variant, const std::vector<AblationRecord>& recs) {
        for (const AblationRecord& r : recs) {
            for (const auto& [model, acc] : r.accuracy) {
                out += std::string(variant) + "," + std::to_string(r.epoch) + "," +
                       csv_escape(model) + "," + format_double(acc) + "," +
                       format_double(r.mean_prob.at(model)) + "\n";
            }
        }
    };
    emit("with_as", t.with_as);
    emit("without_as", t.without_as);
    return out;
}

std::string ablation_to_json(const AblationTrace& t) {
    json j;
    auto pack = [](const std::vector<AblationRecord>& recs) {
        json arr = json::array();
        for (const AblationRecord& r : recs) {
            arr.push_back({{"epoch", r.epoch}, {"accuracy", r.accuracy}, {"mean_probability", r.mean_prob}});
        }
        return arr;
    };
    j["with_as"] = pack(t.with_as);
    j["without_as"] = pack(t.without_as);
    return j.dump(2) + "\n";
}

std::string ablation_to_svg(const AblationTrace& t) {
    SvgFrame f;
    f.min_y = 0.0;
    f.max_y = 1.0;
    f.min_x = 0.0;
    f.max_x = 1.0;
    for (const auto& r : t.with_as) f.max_x = std::max(f.max_x, static_cast<double>(r.epoch));
    for (const auto& r : t.without_as) f.max_x = std::max(f.max_x, static_cast<double>(r.epoch));

    std::vector<std::string> models;
    if (!t.with_as.empty()) {
        for (const auto& [m, v] : t.with_as.front().accuracy) models.push_back(m);
    }
    std::string out = svg_open();
    out += "<line x1=\"48\" y1=\"432\" x2=\"432\" y2=\"432\" stroke=\"#000000\"/>\n";
    out += "<line x1=\"48\" y1=\"48\" x2=\"48\" y2=\"432\" stroke=\"#000000\"/>\n";
    auto polyline = [&](const std::vector<AblationRecord>& recs, const std::string& model,
                        const char* color, const char* dash) {
        if (recs.empty()) return;
        std::string pts;
        for (const AblationRecord& r : recs) {
            pts += svg_num(f.px(r.epoch)) + "," + svg_num(f.py(r.accuracy.at(model))) + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"";
        if (dash[0]) out += " stroke-dasharray=\"" + std::string(dash) + "\"";
        out += " points=\"" + pts + "\"/>\n";
    };
    for (std::size_t i = 0; i < models.size(); ++i) {
        polyline(t.with_as, models[i], kPalette[i % 10], "");
        polyline(t.without_as, models[i], kPalette[i % 10], "4 3");
        out += "<text x=\"300\" y=\"" + svg_num(20.0 + 14.0 * i) +
               "\" font-size=\"10\" font-family=\"sans-serif\" fill=\"" + kPalette[i % 10] +
               "\">" + models[i] + " (solid with AS, dashed without)</text>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string candidates_to_csv(const CandidateSet& v) {
    std::string out = "epoch,loss";
    const int dim = v.entries.empty() ? 0 : v.entries.front().embedding.cols();
    for (int j = 0; j < dim; ++j) out += ",v" + std::to_string(j);
    out += "\n";
    for (const CandidateEntry& e : v.entries) {
        out += std::to_string(e.epoch) + "," + format_double(e.loss);
        for (int j = 0; j < dim; ++j) out += "," + format_double(e.embedding.at(0, j));
        out += "\n";
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("updm: cannot write '" + path.string() + "'");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("updm: failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("updm: cannot read '" + path.string() + "'");
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace updm
