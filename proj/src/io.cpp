#include "cknlab/io.hpp"

#include "cknlab/errors.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <openssl/evp.h>
#include <sstream>

namespace cknlab {

std::string fmt17(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void CsvTable::add(const std::vector<double>& row) {
    std::vector<std::string> r;
    for (double v : row) r.push_back(fmt17(v));
    rows.push_back(std::move(r));
}

std::string CsvTable::str() const {
    std::string s;
    for (size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
    s += "\n";
    for (auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
        s += "\n";
    }
    return s;
}

void write_text(const std::string& path, const std::string& text) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << text;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CsvTable branch_table(const Branch& b) {
    CsvTable t;
    t.columns = {"lambda", "mu", "mu_star", "t_phi", "lowest_eig", "newton_iters", "residual",
                 "arclength"};
    for (const BranchPoint& p : b.points)
        t.add({p.lambda, p.mu, p.mu_star, p.t_phi, p.lowest_eig, double(p.newton_iters), p.residual,
               p.arclength});
    return t;
}

CsvTable curve_table(const CurveB& c) {
    CsvTable t;
    t.columns = {"lambda", "Lambda", "mu", "mu_star_theta", "d_Lambda_d_lambda"};
    for (const CurveSample& s : c.samples)
        t.add({s.lambda, s.Lambda, s.mu, s.mu_star_theta, s.d_Lambda_d_lambda});
    return t;
}

CsvTable trajectory_table(const Trajectory& tr) {
    CsvTable t;
    t.columns = {"time", "mass", "E_p", "I_p", "deficit", "min_density"};
    for (const FlowSample& s : tr.samples)
        t.add({s.time, s.mass, s.E_p, s.I_p, s.deficit, s.min_density});
    return t;
}

CsvTable field_table(const CylinderField& f) {
    CsvTable t;
    t.columns = {"s", "z", "value"};
    auto s = f.full_s();
    auto F = f.full_values();
    const auto& z = f.grid->zonal().nodes();
    for (size_t i = 0; i < s.size(); ++i)
        for (int j = 0; j < f.grid->nz(); ++j) t.add({s[i], z(j), F(i, j)});
    return t;
}

namespace {
template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}
}  // namespace

json to_json(const CKNParams& prm) {
    json j;
    j["d"] = prm.d;
    j["mode"] = to_string(prm.mode);
    j["p"] = prm.p;
    j["a"] = opt(prm.a);
    j["b"] = opt(prm.b);
    j["beta"] = opt(prm.beta);
    j["gamma"] = opt(prm.gamma);
    j["theta"] = prm.theta;
    j["Lambda"] = opt(prm.Lambda);
    j["alpha"] = prm.alpha;
    j["n"] = prm.n;
    j["m"] = prm.m;
    j["a_c"] = prm.a_c();
    return j;
}

json to_json(const Thresholds& t) {
    json j;
    j["lambda_fs"] = opt(t.lambda_fs);
    j["b_fs"] = opt(t.b_fs);
    j["beta_fs"] = opt(t.beta_fs);
    j["alpha_fs"] = opt(t.alpha_fs);
    j["two_sharp"] = opt(t.two_sharp);
    j["lambda_fs_theta"] = opt(t.lambda_fs_theta);
    j["p_star"] = opt(t.p_star);
    j["vartheta"] = opt(t.vartheta);
    return j;
}

json to_json(const Equivalence& e) {
    return json{{"lambda_cond", e.lambda_cond}, {"b_cond", e.b_cond}, {"alpha_cond", e.alpha_cond},
                {"agree", e.agree()}};
}

json to_json(const CriterionReport& r) {
    json j;
    j["d"] = r.d;
    j["p"] = r.p;
    j["vartheta"] = r.vartheta;
    j["c_gn"] = r.c_gn;
    j["mu_star_at_fs"] = r.mu_star_at_fs;
    j["lambda_fs_theta"] = r.lambda_fs_theta;
    j["breaking_predicted"] = r.breaking_predicted;
    if (r.lambda_s_bracket)
        j["lambda_s_bracket"] = {r.lambda_s_bracket->first, r.lambda_s_bracket->second};
    else
        j["lambda_s_bracket"] = nullptr;
    return j;
}

namespace {
json turning_json(const std::vector<TurningPoint>& tps) {
    json a = json::array();
    for (auto& t : tps) a.push_back({{"lambda", t.lambda}, {"Lambda", t.Lambda}, {"index", t.index}});
    return a;
}
}  // namespace

json to_json(const BifurcationClass& b) {
    return json{{"direction", to_string(b.direction)},
                {"slope", b.slope},
                {"turning_points", turning_json(b.turning_points)}};
}

json to_json(const ProbeReport& r) {
    json j;
    j["d"] = r.d;
    j["p"] = r.p;
    json rows = json::array();
    for (auto& row : r.rows) {
        rows.push_back({{"theta", row.theta},
                        {"direction", to_string(row.direction)},
                        {"slope", row.slope},
                        {"turning_points", turning_json(row.turning_points)},
                        {"monotone", row.monotone},
                        {"breaking_predicted", row.breaking_predicted},
                        {"breaking_from", opt(row.breaking_from)}});
    }
    j["rows"] = rows;
    j["theta_flip"] = opt(r.theta_flip);
    j["monotone_at_vartheta"] = opt(r.monotone_at_vartheta);
    j["criterion"] = to_json(r.criterion);
    return j;
}

std::string sha256_file(const std::string& path) {
    std::string data = read_text(path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
        throw Error("sha256 failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

void RunManifest::add_artifact(const std::string& path) {
    artifacts.push_back({path, sha256_file(path)});
}

json RunManifest::to_json() const {
    json j;
    j["command"] = command;
    j["parameters"] = parameters;
    j["settings"] = settings;
    j["wall_clock_seconds"] = wall_clock;
    json a = json::array();
    for (auto& x : artifacts)
        a.push_back({{"path", std::filesystem::path(x.path).filename().string()}, {"sha256", x.sha256}});
    j["artifacts"] = a;
    return j;
}

std::string RunManifest::write(const std::string& path) const {
    write_text(path, to_json().dump(2) + "\n");
    return path;
}

}  // namespace cknlab
