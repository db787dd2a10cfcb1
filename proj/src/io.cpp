#include "nutty/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nutty/error.hpp"

namespace nutty {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    if (!field.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value))
        throw ParseError("line " + std::to_string(line_no) + ": '" + std::string(field) + "' is not a finite number");
    return value;
}

// Calls row(fields, line_no) for each data line after checking the header.
template <typename Row>
void each_row(std::string_view text, const std::vector<std::string_view>& header, Row row) {
    std::size_t line_no = 0;
    bool seen_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (!seen_header) {
            if (fields != header) {
                std::string expected;
                for (const auto& h : header) expected += (expected.empty() ? "" : ",") + std::string(h);
                throw ParseError("line " + std::to_string(line_no) + ": expected header '" + expected + "'");
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields");
        row(fields, line_no);
    }
    if (!seen_header) throw ParseError("missing CSV header");
}

std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<nmf::SetPoint> parse_set_points_csv(std::string_view text) {
    std::vector<nmf::SetPoint> out;
    each_row(text, {"t", "s"}, [&](const auto& f, std::size_t line_no) {
        nmf::SetPoint p{parse_number(f[0], line_no), parse_number(f[1], line_no)};
        if (!out.empty() && p.t < out.back().t)
            throw ParseError("line " + std::to_string(line_no) + ": timestamps must be non-decreasing");
        out.push_back(p);
    });
    if (out.empty()) throw ParseError("no set-points");
    return out;
}

std::string outputs_to_csv(std::span<const nmf::FilterOutput> outputs) {
    std::string out = "t,x,v,a,j\n";
    for (const auto& o : outputs) {
        out += format(o.t) + "," + format(o.x) + "," + format(o.v) + "," + format(o.a) + "," + format(o.j) + "\n";
    }
    return out;
}

std::vector<nmf::FilterOutput> parse_outputs_csv(std::string_view text) {
    std::vector<nmf::FilterOutput> out;
    each_row(text, {"t", "x", "v", "a", "j"}, [&](const auto& f, std::size_t line_no) {
        nmf::FilterOutput o;
        o.t = parse_number(f[0], line_no);
        o.x = parse_number(f[1], line_no);
        o.v = parse_number(f[2], line_no);
        o.a = parse_number(f[3], line_no);
        o.j = parse_number(f[4], line_no);
        out.push_back(o);
    });
    return out;
}

nmf::FilterParams parse_filter_params(std::string_view text) { return merge_filter_params(nmf::FilterParams{}, text); }

nmf::FilterParams merge_filter_params(const nmf::FilterParams& base, std::string_view text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("filter params: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("filter params must be a JSON object");

    nmf::FilterParams p = base;
    if (doc.contains("preset")) {
        if (!doc["preset"].is_string()) throw ValidationError("'preset' must be a string");
        const auto preset = nmf::filter_preset(doc["preset"].get<std::string>());
        if (!preset) throw ValidationError("unknown preset '" + doc["preset"].get<std::string>() + "'");
        p = *preset;
    }
    const auto number = [&](const std::string& key, const json& v) {
        if (!v.is_number()) throw ValidationError("'" + key + "' must be a number");
        return v.get<double>();
    };
    for (const auto& [key, v] : doc.items()) {
        if (key == "preset") continue;
        if (key == "order") {
            const double o = number(key, v);
            if (o != 1.0 && o != 2.0 && o != 3.0) throw ValidationError("'order' must be 1, 2 or 3");
            p.order = static_cast<nmf::Order>(static_cast<int>(o));
        } else if (key == "limiter") {
            if (v == "tanh") {
                p.limiter = nmf::Limiter::Tanh;
            } else if (v == "hard") {
                p.limiter = nmf::Limiter::Hard;
            } else {
                throw ValidationError("'limiter' must be \"tanh\" or \"hard\"");
            }
        } else if (key == "smoothness") {
            p.smoothness = number(key, v);
        } else if (key == "responsiveness") {
            p.responsiveness = number(key, v);
        } else if (key == "beta") {
            const double b = number(key, v);
            if (b != std::floor(b)) throw ValidationError("'beta' must be an integer");
            p.beta = static_cast<int>(b);
        } else if (key == "p_min") {
            p.p_min = number(key, v);
        } else if (key == "p_max") {
            p.p_max = number(key, v);
        } else if (key == "velocity_limit") {
            p.velocity_limit = number(key, v);
        } else if (key == "acceleration_limit") {
            p.acceleration_limit = number(key, v);
        } else if (key == "jerk_limit") {
            p.jerk_limit = number(key, v);
        } else if (key == "sample_rate") {
            p.sample_rate = number(key, v);
        } else if (key == "stabilizer") {
            if (!v.is_boolean()) throw ValidationError("'stabilizer' must be a boolean");
            p.stabilizer_enabled = v.get<bool>();
        } else {
            throw ValidationError("unknown filter parameter '" + key + "'");
        }
    }
    p.validate();
    return p;
}

std::string filter_params_to_json(const nmf::FilterParams& p) {
    nlohmann::json doc = {
        {"order", static_cast<int>(p.order)},
        {"limiter", p.limiter == nmf::Limiter::Tanh ? "tanh" : "hard"},
        {"smoothness", p.smoothness},
        {"responsiveness", p.responsiveness},
        {"beta", p.beta},
        {"p_min", p.p_min},
        {"p_max", p.p_max},
        {"velocity_limit", p.velocity_limit},
        {"acceleration_limit", p.acceleration_limit},
        {"jerk_limit", p.jerk_limit},
        {"sample_rate", p.sample_rate},
        {"stabilizer", p.stabilizer_enabled},
    };
    return doc.dump();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ParseError("failed writing '" + path + "'");
}

}  // namespace nutty
