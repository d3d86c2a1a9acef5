#include "gridcf/caseio.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gridcf/errors.hpp"

namespace gridcf {

namespace {

using Row = std::vector<double>;
using Table = std::vector<Row>;

bool is_ident_char(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
}

std::string strip_comments(std::string_view body) {
    std::string out;
    out.reserve(body.size());
    bool in_comment = false;
    for (char ch : body) {
        if (ch == '\n') {
            in_comment = false;
            out.push_back('\n');
        } else if (ch == '%') {
            in_comment = true;
        } else if (!in_comment) {
            out.push_back(ch);
        }
    }
    return out;
}

// Position just past `mpc.<name>` followed by optional spaces and '=', or npos.
std::size_t find_assignment(std::string_view text, std::string_view name) {
    const std::string key = "mpc." + std::string(name);
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string_view::npos) {
        // Skip matches inside a comment line.
        const std::size_t line_start = text.rfind('\n', pos);
        const std::size_t from = line_start == std::string_view::npos ? 0 : line_start + 1;
        const bool commented = text.substr(from, pos - from).find('%') != std::string_view::npos;
        std::size_t p = pos + key.size();
        if (!commented && (p >= text.size() || !is_ident_char(text[p]))) {
            while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
            if (p < text.size() && text[p] == '=') return p + 1;
        }
        pos += key.size();
    }
    return std::string_view::npos;
}

double parse_number(const std::string& token, std::string_view section) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw SyntaxError("mpc." + std::string(section) + ": bad numeric token '" + token + "'");
    }
    return v;
}

double read_scalar(std::string_view text, std::string_view name) {
    std::size_t p = find_assignment(text, name);
    if (p == std::string_view::npos) {
        throw SyntaxError("missing section mpc." + std::string(name));
    }
    const std::size_t end = text.find(';', p);
    if (end == std::string_view::npos) {
        throw SyntaxError("unterminated mpc." + std::string(name));
    }
    std::string token(text.substr(p, end - p));
    const auto first = token.find_first_not_of(" \t\r\n");
    const auto last = token.find_last_not_of(" \t\r\n");
    if (first == std::string::npos) throw SyntaxError("empty mpc." + std::string(name));
    return parse_number(token.substr(first, last - first + 1), name);
}

Table read_matrix(std::string_view text, std::string_view name, std::size_t min_cols) {
    std::size_t p = find_assignment(text, name);
    if (p == std::string_view::npos) {
        throw SyntaxError("missing section mpc." + std::string(name));
    }
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    if (p >= text.size() || text[p] != '[') {
        throw SyntaxError("mpc." + std::string(name) + " is not a matrix literal");
    }
    // Find the closing bracket outside comments.
    std::size_t q = p + 1;
    bool in_comment = false;
    for (; q < text.size(); ++q) {
        const char ch = text[q];
        if (ch == '\n') in_comment = false;
        else if (ch == '%') in_comment = true;
        else if (ch == ']' && !in_comment) break;
    }
    if (q >= text.size()) {
        throw SyntaxError("unterminated matrix mpc." + std::string(name));
    }
    const std::string body = strip_comments(text.substr(p + 1, q - p - 1));

    Table rows;
    std::string current;
    auto flush = [&]() {
        std::istringstream in(current);
        Row row;
        std::string token;
        while (in >> token) {
            row.push_back(parse_number(token, name));
        }
        if (!row.empty()) {
            if (row.size() < min_cols) {
                throw SyntaxError("mpc." + std::string(name) + ": row " +
                                  std::to_string(rows.size() + 1) + " has " +
                                  std::to_string(row.size()) + " columns, need " +
                                  std::to_string(min_cols));
            }
            if (!rows.empty() && row.size() != rows.front().size()) {
                throw SyntaxError("mpc." + std::string(name) + ": row " +
                                  std::to_string(rows.size() + 1) +
                                  " has inconsistent column count");
            }
            rows.push_back(std::move(row));
        }
        current.clear();
    };
    for (char ch : body) {
        if (ch == ';' || ch == '\n') {
            flush();
        } else {
            current.push_back(ch == ',' ? ' ' : ch);
        }
    }
    flush();
    return rows;
}

std::string read_function_name(std::string_view text) {
    const std::size_t p = text.find("function");
    if (p == std::string_view::npos) return {};
    const std::size_t eq = text.find('=', p);
    const std::size_t nl = text.find('\n', p);
    if (eq == std::string_view::npos || (nl != std::string_view::npos && eq > nl)) return {};
    std::size_t b = eq + 1;
    while (b < text.size() && (text[b] == ' ' || text[b] == '\t')) ++b;
    std::size_t e = b;
    while (e < text.size() && is_ident_char(text[e])) ++e;
    return std::string(text.substr(b, e - b));
}

int as_bus_id(double v, std::string_view what) {
    if (v != std::floor(v)) {
        throw SyntaxError(std::string(what) + ": non-integer bus number");
    }
    return static_cast<int>(v);
}

}  // namespace

std::vector<double> NetworkCase::nominal_loads() const {
    std::vector<double> out;
    out.reserve(buses.size());
    for (const auto& b : buses) out.push_back(b.nominal_load);
    return out;
}

double NetworkCase::total_generation_capacity() const {
    double total = 0.0;
    for (const auto& g : generators) total += g.p_max;
    return total;
}

std::size_t NetworkCase::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    throw IndexError("unknown bus id " + std::to_string(id));
}

NetworkCase parse_case(std::string_view text, const ParseOptions& options) {
    if (!(options.line_limit_scale > 0.0)) {
        throw SemanticError("line limit scale must be positive");
    }
    NetworkCase c;
    c.name = read_function_name(text);
    c.base_mva = read_scalar(text, "baseMVA");
    if (!(c.base_mva > 0.0)) throw SemanticError("baseMVA must be positive");

    const Table bus_rows = read_matrix(text, "bus", 3);
    const Table gen_rows = read_matrix(text, "gen", 10);
    const Table branch_rows = read_matrix(text, "branch", 11);
    const Table cost_rows = read_matrix(text, "gencost", 4);

    std::unordered_map<int, std::size_t> index_of;
    std::unordered_map<int, bool> isolated;
    std::size_t slack_count = 0;
    for (const Row& r : bus_rows) {
        const int id = as_bus_id(r[0], "mpc.bus");
        const int type = static_cast<int>(r[1]);
        if (index_of.contains(id) || isolated.contains(id)) {
            throw SemanticError("duplicate bus id " + std::to_string(id));
        }
        if (type == 4) {
            isolated[id] = true;
            continue;
        }
        Bus b;
        b.id = id;
        b.type = type;
        b.nominal_load = r[2] > 0.0 ? r[2] : 0.0;
        b.fixed_injection = r[2] < 0.0 ? -r[2] : 0.0;
        if (type == 3) {
            ++slack_count;
            c.slack_bus = c.buses.size();
        }
        index_of[id] = c.buses.size();
        c.buses.push_back(b);
    }
    if (slack_count != 1) {
        throw SemanticError("expected exactly one slack bus, found " + std::to_string(slack_count));
    }

    if (cost_rows.size() < gen_rows.size()) {
        throw SemanticError("mpc.gencost has fewer rows than mpc.gen");
    }
    for (std::size_t g = 0; g < gen_rows.size(); ++g) {
        const Row& r = gen_rows[g];
        if (r[7] <= 0.0) continue;  // out of service
        const int id = as_bus_id(r[0], "mpc.gen");
        if (isolated.contains(id)) continue;
        const auto it = index_of.find(id);
        if (it == index_of.end()) {
            throw SemanticError("generator at unknown bus " + std::to_string(id));
        }
        Generator gen;
        gen.bus = it->second;
        gen.p_max = r[8];
        gen.p_min = r[9];
        if (gen.p_min > gen.p_max) {
            throw SemanticError("generator at bus " + std::to_string(id) + " has Pmin > Pmax");
        }
        const Row& cost = cost_rows[g];
        const int model = static_cast<int>(cost[0]);
        const auto n = static_cast<std::size_t>(cost[3]);
        if (model == 2) {
            if (cost.size() < 4 + n) throw SyntaxError("mpc.gencost: row too short for its order");
            // Coefficients are stored highest order first: c(n-1) ... c0.
            auto coef = [&](std::size_t power) {
                return power < n ? cost[4 + (n - 1 - power)] : 0.0;
            };
            gen.cost_linear = coef(1);
            gen.cost_quadratic = coef(2);
        } else if (model == 1) {
            // Piecewise linear: average slope over the breakpoints.
            if (n < 2 || cost.size() < 4 + 2 * n) {
                throw SyntaxError("mpc.gencost: malformed piecewise-linear row");
            }
            const double x0 = cost[4], y0 = cost[5];
            const double x1 = cost[4 + 2 * (n - 1)], y1 = cost[5 + 2 * (n - 1)];
            gen.cost_linear = x1 != x0 ? (y1 - y0) / (x1 - x0) : 0.0;
        } else {
            throw SemanticError("unsupported gencost model " + std::to_string(model));
        }
        c.generators.push_back(gen);
    }

    const double sentinel = options.sentinel_factor * c.total_generation_capacity();
    for (const Row& r : branch_rows) {
        if (r[10] <= 0.0) continue;
        const int from = as_bus_id(r[0], "mpc.branch");
        const int to = as_bus_id(r[1], "mpc.branch");
        if (isolated.contains(from) || isolated.contains(to)) continue;
        const auto fi = index_of.find(from);
        const auto ti = index_of.find(to);
        if (fi == index_of.end() || ti == index_of.end()) {
            throw SemanticError("branch " + std::to_string(from) + "-" + std::to_string(to) +
                                " references a bus not in mpc.bus");
        }
        if (fi->second == ti->second) {
            throw SemanticError("branch " + std::to_string(from) + "-" + std::to_string(to) +
                                " is a self loop");
        }
        const double x = r[3];
        if (x == 0.0) {
            throw SemanticError("branch " + std::to_string(from) + "-" + std::to_string(to) +
                                " has zero reactance");
        }
        Branch br;
        br.from_bus = fi->second;
        br.to_bus = ti->second;
        br.susceptance = 1.0 / x;
        if (r[5] > 0.0) {
            br.flow_limit = r[5] * options.line_limit_scale;
        } else {
            br.flow_limit = sentinel;
            br.unlimited = true;
        }
        if (!(br.flow_limit > 0.0)) {
            throw SemanticError("branch " + std::to_string(from) + "-" + std::to_string(to) +
                                " has no positive flow limit");
        }
        c.branches.push_back(br);
    }
    return c;
}

NetworkCase parse_case(std::string_view text, double line_limit_scale) {
    ParseOptions options;
    options.line_limit_scale = line_limit_scale;
    return parse_case(text, options);
}

NetworkCase load_case_file(const std::string& path, double line_limit_scale) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open case file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str(), line_limit_scale);
}

NetworkCase scale_line_limits(const NetworkCase& c, double factor) {
    NetworkCase out = c;
    for (auto& br : out.branches) {
        if (!br.unlimited) br.flow_limit *= factor;
    }
    return out;
}

double incident_line_capacity(const NetworkCase& c, std::size_t bus) {
    if (bus >= c.buses.size()) {
        throw IndexError("bus index " + std::to_string(bus) + " out of range");
    }
    double total = 0.0;
    for (const auto& br : c.branches) {
        if (br.from_bus == bus || br.to_bus == bus) total += br.flow_limit;
    }
    return total;
}

nlohmann::json case_to_json(const NetworkCase& c) {
    nlohmann::json j;
    j["schema"] = "gridcf.case/1";
    j["name"] = c.name;
    j["baseMVA"] = c.base_mva;
    j["slack"] = c.slack_bus;
    auto& buses = j["buses"] = nlohmann::json::array();
    for (const auto& b : c.buses) {
        buses.push_back({{"id", b.id}, {"type", b.type}, {"pd", b.nominal_load},
                         {"injection", b.fixed_injection}});
    }
    auto& gens = j["generators"] = nlohmann::json::array();
    for (const auto& g : c.generators) {
        gens.push_back({{"bus", g.bus}, {"pmin", g.p_min}, {"pmax", g.p_max},
                        {"c1", g.cost_linear}, {"c2", g.cost_quadratic}});
    }
    auto& branches = j["branches"] = nlohmann::json::array();
    for (const auto& br : c.branches) {
        branches.push_back({{"from", br.from_bus}, {"to", br.to_bus}, {"b", br.susceptance},
                            {"rate", br.flow_limit}, {"unlimited", br.unlimited}});
    }
    return j;
}

NetworkCase case_from_json(const nlohmann::json& j) {
    try {
        NetworkCase c;
        c.name = j.value("name", std::string{});
        c.base_mva = j.at("baseMVA").get<double>();
        c.slack_bus = j.at("slack").get<std::size_t>();
        for (const auto& b : j.at("buses")) {
            c.buses.push_back({b.at("id").get<int>(), b.at("type").get<int>(),
                               b.at("pd").get<double>(), b.value("injection", 0.0)});
        }
        for (const auto& g : j.at("generators")) {
            c.generators.push_back({g.at("bus").get<std::size_t>(), g.at("pmin").get<double>(),
                                    g.at("pmax").get<double>(), g.at("c1").get<double>(),
                                    g.value("c2", 0.0)});
        }
        for (const auto& br : j.at("branches")) {
            c.branches.push_back({br.at("from").get<std::size_t>(), br.at("to").get<std::size_t>(),
                                  br.at("b").get<double>(), br.at("rate").get<double>(),
                                  br.value("unlimited", false)});
        }
        const std::size_t n = c.buses.size();
        if (c.slack_bus >= n) throw SemanticError("slack index out of range");
        for (const auto& g : c.generators) {
            if (g.bus >= n) throw SemanticError("generator bus index out of range");
        }
        for (const auto& br : c.branches) {
            if (br.from_bus >= n || br.to_bus >= n) {
                throw SemanticError("branch endpoint out of range");
            }
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw SyntaxError(std::string("case json: ") + e.what());
    }
}

}  // namespace gridcf
