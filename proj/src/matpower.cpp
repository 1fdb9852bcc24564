#include "cloudopf/matpower.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

namespace cloudopf {

namespace {

using Matrix = std::vector<std::vector<double>>;

std::string strip_comments(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_comment = false;
    bool in_string = false;
    for (char ch : text) {
        if (in_comment) {
            if (ch == '\n') { in_comment = false; out.push_back(ch); }
            continue;
        }
        if (ch == '\'') in_string = !in_string;
        if (ch == '%' && !in_string) { in_comment = true; continue; }
        out.push_back(ch);
    }
    return out;
}

// mpc.<name> = <value>;  where value is a scalar, a 'string' or a [matrix]
struct RawCase {
    std::map<std::string, double> scalars;
    std::map<std::string, Matrix> matrices;
};

double parse_number(const std::string& tok) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ParseError("not a number: '" + tok + "'");
    }
    if (pos != tok.size()) throw ParseError("trailing characters in number: '" + tok + "'");
    return v;
}

Matrix parse_matrix(const std::string& body) {
    Matrix rows;
    std::vector<double> row;
    std::string tok;
    auto flush_tok = [&]() {
        if (!tok.empty()) { row.push_back(parse_number(tok)); tok.clear(); }
    };
    auto flush_row = [&]() {
        flush_tok();
        if (!row.empty()) { rows.push_back(row); row.clear(); }
    };
    for (std::size_t i = 0; i < body.size(); ++i) {
        char ch = body[i];
        if (ch == '.' && i + 2 < body.size() && body[i + 1] == '.' && body[i + 2] == '.') {
            i += 2;  // MATLAB continuation: swallow, row continues on next line
            while (i + 1 < body.size() && body[i + 1] != '\n') ++i;
            continue;
        }
        if (ch == ';' || ch == '\n') { flush_row(); continue; }
        if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\r') { flush_tok(); continue; }
        tok.push_back(ch);
    }
    flush_row();
    if (!rows.empty()) {
        std::size_t w = rows.front().size();
        for (const auto& r : rows)
            if (r.size() != w) throw ParseError("ragged matrix row (" + std::to_string(r.size()) +
                                                " entries, expected " + std::to_string(w) + ")");
    }
    return rows;
}

RawCase parse_raw(const std::string& original) {
    const std::string text = strip_comments(original);
    RawCase raw;
    std::size_t pos = 0;
    while (true) {
        std::size_t at = text.find("mpc.", pos);
        if (at == std::string::npos) break;
        std::size_t name_end = at + 4;
        while (name_end < text.size() && (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_'))
            ++name_end;
        std::string name = text.substr(at + 4, name_end - at - 4);
        std::size_t eq = text.find('=', name_end);
        if (eq == std::string::npos) throw ParseError("mpc." + name + ": missing '='");
        std::size_t v = eq + 1;
        while (v < text.size() && std::isspace(static_cast<unsigned char>(text[v]))) ++v;
        if (v >= text.size()) throw ParseError("mpc." + name + ": missing value");
        if (text[v] == '[') {
            std::size_t close = text.find(']', v);
            if (close == std::string::npos) throw ParseError("mpc." + name + ": unterminated matrix");
            raw.matrices[name] = parse_matrix(text.substr(v + 1, close - v - 1));
            pos = close + 1;
        } else if (text[v] == '\'') {
            std::size_t close = text.find('\'', v + 1);
            if (close == std::string::npos) throw ParseError("mpc." + name + ": unterminated string");
            pos = close + 1;  // string fields (version, name) are ignored
        } else {
            std::size_t end = text.find_first_of(";\n", v);
            if (end == std::string::npos) end = text.size();
            raw.scalars[name] = parse_number(text.substr(v, end - v));
            pos = end;
        }
    }
    return raw;
}

const Matrix& require(const RawCase& raw, const char* name) {
    auto it = raw.matrices.find(name);
    if (it == raw.matrices.end()) throw ParseError(std::string("missing mpc.") + name);
    return it->second;
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Chooses a file-side decimal whose parse-side conversion reproduces `target`
// exactly. conv(y) is either y*k or y/k; the candidate y0 = inverse image is
// adjusted by ulps when rounding lands one double off.
double exact_preimage(double target, double k, bool parse_multiplies) {
    auto conv = [&](double y) { return parse_multiplies ? y * k : y / k; };
    double y = parse_multiplies ? target / k : target * k;
    if (conv(y) == target || !std::isfinite(y)) return y;
    for (int step = 1; step <= 4; ++step) {
        double up = y, dn = y;
        for (int s = 0; s < step; ++s) {
            up = std::nextafter(up, std::numeric_limits<double>::infinity());
            dn = std::nextafter(dn, -std::numeric_limits<double>::infinity());
        }
        if (conv(up) == target) return up;
        if (conv(dn) == target) return dn;
    }
    return y;  // no exact preimage exists; nearest value
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // trim to the shortest representation that round-trips
    for (int prec = 1; prec <= 16; ++prec) {
        char s[40];
        std::snprintf(s, sizeof s, "%.*g", prec, v);
        if (std::strtod(s, nullptr) == v) return s;
    }
    return buf;
}

}  // namespace

NetworkCase parse_matpower_case(const std::string& text) {
    RawCase raw = parse_raw(text);

    NetworkCase net;
    auto base_it = raw.scalars.find("baseMVA");
    if (base_it == raw.scalars.end()) throw ParseError("missing mpc.baseMVA");
    net.base_mva = base_it->second;
    if (!(net.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
    const double base = net.base_mva;

    const Matrix& bus = require(raw, "bus");
    const Matrix& gen = require(raw, "gen");
    const Matrix& branch = require(raw, "branch");
    const Matrix& gencost = require(raw, "gencost");

    std::map<int, int> id2idx;
    for (const auto& row : bus) {
        if (row.size() < 13) throw ParseError("bus row has fewer than 13 columns");
        Bus b;
        b.id = int(row[0]);
        if (id2idx.count(b.id)) throw ValidationError("duplicate bus id " + std::to_string(b.id));
        int type = int(row[1]);
        if (type == 4) throw ValidationError("isolated bus " + std::to_string(b.id) + " not supported");
        b.kind = type == 3 ? BusKind::Slack : (type == 2 ? BusKind::PV : BusKind::PQ);
        b.pd_base = row[2] / base;
        b.qd_base = row[3] / base;
        b.gs = row[4] / base;
        b.bs = row[5] / base;
        b.vmax = row[11];
        b.vmin = row[12];
        id2idx[b.id] = net.n_buses();
        net.buses.push_back(b);
    }

    auto bus_of = [&](double id_raw, const char* what) {
        auto it = id2idx.find(int(id_raw));
        if (it == id2idx.end())
            throw ValidationError(std::string(what) + " references unknown bus " + std::to_string(int(id_raw)));
        return it->second;
    };

    if (gencost.size() != gen.size() && gencost.size() != 2 * gen.size())
        throw ValidationError("gencost must have one row per generator (or two, P then Q)");

    std::vector<bool> has_gen(net.buses.size(), false);
    for (std::size_t i = 0; i < gen.size(); ++i) {
        const auto& row = gen[i];
        if (row.size() < 10) throw ParseError("gen row has fewer than 10 columns");
        if (row[7] <= 0) continue;  // out of service
        Generator g;
        g.bus = bus_of(row[0], "generator");
        g.pg_init = row[1] / base;
        g.qg_init = row[2] / base;
        g.qmax = row[3] / base;
        g.qmin = row[4] / base;
        g.v_setpoint = row[5];
        g.pmax = row[8] / base;
        g.pmin = row[9] / base;

        const auto& cost = gencost[i];
        if (cost.size() < 4) throw ParseError("gencost row has fewer than 4 columns");
        int model = int(cost[0]);
        if (model != 2) throw ValidationError("only polynomial cost model 2 is supported (got model " +
                                              std::to_string(model) + ", piecewise-linear rejected)");
        int ncoef = int(cost[3]);
        if (ncoef < 1 || ncoef > 3) throw ValidationError("polynomial cost must have degree <= 2");
        if (cost.size() < std::size_t(4 + ncoef)) throw ParseError("gencost row shorter than its coefficient count");
        double c2 = 0, c1 = 0, c0 = 0;
        if (ncoef == 3) { c2 = cost[4]; c1 = cost[5]; c0 = cost[6]; }
        else if (ncoef == 2) { c1 = cost[4]; c0 = cost[5]; }
        else { c0 = cost[4]; }
        g.cost_a = c2 * (base * base);
        g.cost_b = c1 * base;
        g.cost_c = c0;
        has_gen[g.bus] = true;
        net.generators.push_back(g);
    }

    for (const auto& row : branch) {
        if (row.size() < 11) throw ParseError("branch row has fewer than 11 columns");
        if (row[10] <= 0) continue;  // out of service
        Branch br;
        br.from_bus = bus_of(row[0], "branch");
        br.to_bus = bus_of(row[1], "branch");
        br.r = row[2];
        br.x = row[3];
        br.b_charging = row[4];
        br.s_max = row[5] / base;
        br.tap_ratio = row[8] == 0.0 ? 1.0 : row[8];
        br.phase_shift = row[9] * kDegToRad;
        net.branches.push_back(br);
    }

    // normalize kinds to match in-service generators; the slack must keep one
    for (int i = 0; i < net.n_buses(); ++i) {
        Bus& b = net.buses[i];
        if (b.kind == BusKind::Slack) {
            if (!has_gen[i]) throw ValidationError("slack bus " + std::to_string(b.id) + " has no in-service generator");
            net.slack_bus = i;
        } else if (b.kind == BusKind::PV && !has_gen[i]) {
            b.kind = BusKind::PQ;
        } else if (b.kind == BusKind::PQ && has_gen[i]) {
            b.kind = BusKind::PV;
        }
    }

    validate(net);
    return net;
}

NetworkCase load_matpower_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_matpower_case(ss.str());
}

std::string to_matpower_case(const NetworkCase& net, const std::string& name) {
    const double base = net.base_mva;
    std::ostringstream out;
    out << "function mpc = " << name << "\n";
    out << "mpc.version = '2';\n";
    out << "mpc.baseMVA = " << fmt(base) << ";\n\n";

    auto mw = [&](double pu_value) { return fmt(exact_preimage(pu_value, base, false)); };

    out << "mpc.bus = [\n";
    for (int i = 0; i < net.n_buses(); ++i) {
        const Bus& b = net.buses[i];
        int type = b.kind == BusKind::Slack ? 3 : (b.kind == BusKind::PV ? 2 : 1);
        out << '\t' << b.id << '\t' << type
            << '\t' << mw(net.pd(i)) << '\t' << mw(net.qd(i))
            << '\t' << mw(b.gs) << '\t' << mw(b.bs)
            << "\t1\t1\t0\t0\t1\t" << fmt(b.vmax) << '\t' << fmt(b.vmin) << ";\n";
    }
    out << "];\n\n";

    out << "mpc.gen = [\n";
    for (const Generator& g : net.generators) {
        out << '\t' << net.buses[g.bus].id
            << '\t' << mw(g.pg_init) << '\t' << mw(g.qg_init)
            << '\t' << mw(g.qmax) << '\t' << mw(g.qmin)
            << '\t' << fmt(g.v_setpoint) << "\t" << fmt(base) << "\t1\t"
            << mw(g.pmax) << '\t' << mw(g.pmin) << ";\n";
    }
    out << "];\n\n";

    out << "mpc.branch = [\n";
    for (const Branch& br : net.branches) {
        double shift_deg = exact_preimage(br.phase_shift, kDegToRad, true);
        out << '\t' << net.buses[br.from_bus].id << '\t' << net.buses[br.to_bus].id
            << '\t' << fmt(br.r) << '\t' << fmt(br.x) << '\t' << fmt(br.b_charging)
            << '\t' << mw(br.s_max) << "\t0\t0\t"
            << fmt(br.tap_ratio) << '\t' << fmt(shift_deg) << "\t1;\n";
    }
    out << "];\n\n";

    out << "mpc.gencost = [\n";
    for (const Generator& g : net.generators) {
        double c2 = exact_preimage(g.cost_a, base * base, true);
        double c1 = exact_preimage(g.cost_b, base, true);
        out << "\t2\t0\t0\t3\t" << fmt(c2) << '\t' << fmt(c1) << '\t' << fmt(g.cost_c) << ";\n";
    }
    out << "];\n";
    return out.str();
}

bool model_equal(const NetworkCase& a, const NetworkCase& b) {
    if (a.base_mva != b.base_mva || a.n_buses() != b.n_buses() ||
        a.n_branches() != b.n_branches() || a.n_generators() != b.n_generators() ||
        a.slack_bus != b.slack_bus)
        return false;
    for (int i = 0; i < a.n_buses(); ++i) {
        const Bus &x = a.buses[i], &y = b.buses[i];
        if (x.id != y.id || x.kind != y.kind || a.pd(i) != b.pd(i) || a.qd(i) != b.qd(i) ||
            x.vmin != y.vmin || x.vmax != y.vmax || x.gs != y.gs || x.bs != y.bs)
            return false;
    }
    for (int i = 0; i < a.n_branches(); ++i) {
        const Branch &x = a.branches[i], &y = b.branches[i];
        if (x.from_bus != y.from_bus || x.to_bus != y.to_bus || x.r != y.r || x.x != y.x ||
            x.b_charging != y.b_charging || x.tap_ratio != y.tap_ratio ||
            x.phase_shift != y.phase_shift || x.s_max != y.s_max)
            return false;
    }
    for (int i = 0; i < a.n_generators(); ++i) {
        const Generator &x = a.generators[i], &y = b.generators[i];
        if (x.bus != y.bus || x.pmin != y.pmin || x.pmax != y.pmax || x.qmin != y.qmin ||
            x.qmax != y.qmax || x.cost_a != y.cost_a || x.cost_b != y.cost_b ||
            x.cost_c != y.cost_c || x.v_setpoint != y.v_setpoint ||
            x.pg_init != y.pg_init || x.qg_init != y.qg_init)
            return false;
    }
    return true;
}

}  // namespace cloudopf
