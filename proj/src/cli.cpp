#include "cknlab/cli.hpp"

#include "cknlab/branch_analysis.hpp"
#include "cknlab/errors.hpp"
#include "cknlab/functionals.hpp"
#include "cknlab/io.hpp"
#include "cknlab/params.hpp"
#include "cknlab/sphere_flows.hpp"
#include "cknlab/verify.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

namespace cknlab {

namespace fs = std::filesystem;

namespace {

struct BranchOpts {
    int d = 5;
    double p = 2.8;
    ContinuationConfig cfg;
    bool no_eigs = false;

    void add(CLI::App* s) {
        s->add_option("--d", d, "dimension")->check(CLI::Range(2, 64))->required();
        s->add_option("--p", p, "exponent")->check(CLI::Range(2.0, 1e6))->required();
        s->add_option("--lambda-max", cfg.lambda_max)->check(CLI::Range(0.0, 1e4))->capture_default_str();
        s->add_option("--grid-h", cfg.h, "s-grid spacing")->check(CLI::Range(1e-4, 1.0))->capture_default_str();
        s->add_option("--L", cfg.L, "half length (0: automatic)")->check(CLI::Range(0.0, 1e4))->capture_default_str();
        s->add_option("--nz", cfg.nz, "zonal nodes")->check(CLI::Range(4, 256))->capture_default_str();
        s->add_option("--ds-max", cfg.ds_max)->check(CLI::Range(1e-6, 10.0))->capture_default_str();
        s->add_option("--max-points", cfg.max_points)->check(CLI::Range(10, 100000))->capture_default_str();
        s->add_flag("--no-eigs", no_eigs, "skip the lowest 2D eigenvalue per point");
    }
    ContinuationConfig config() const {
        ContinuationConfig c = cfg;
        c.compute_eigs = !no_eigs;
        return c;
    }
};

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-")
        std::cout << text;
    else
        write_text(out, text);
}

// options of a subcommand as resolved strings
json resolved_options(const CLI::App* sub) {
    json j = json::object();
    for (const CLI::Option* o : sub->get_options()) {
        std::string name = o->get_name(false, true);
        if (name.rfind("--", 0) != 0 || name == "--help") continue;
        name = name.substr(2);
        if (name == "out") continue;
        if (o->count() > 0) {
            auto r = o->results();
            j[name] = r.size() == 1 ? json(r[0]) : json(r);
        } else {
            std::string def = o->get_default_str();
            j[name] = def.empty() ? json(nullptr) : json(def);
        }
    }
    return j;
}

class ManifestScope {
public:
    ManifestScope(std::string command, const CLI::App* sub)
        : t0_(std::chrono::steady_clock::now()) {
        man_.command = std::move(command);
        man_.parameters = resolved_options(sub);
    }
    RunManifest& manifest() { return man_; }
    void add(const std::string& path) {
        if (!path.empty() && path != "-") man_.add_artifact(path);
    }
    void finish(const std::string& out) {
        man_.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        if (!out.empty() && out != "-") man_.write(out + ".manifest.json");
    }

private:
    RunManifest man_;
    std::chrono::steady_clock::time_point t0_;
};

json settings_json(const ContinuationConfig& c) {
    return json{{"lambda_max", c.lambda_max}, {"h", c.h},         {"L", c.L},
                {"nz", c.nz},                 {"ds_first", c.ds_first}, {"n_small", c.n_small},
                {"ds_max", c.ds_max},         {"ds_min", c.ds_min}, {"growth", c.growth},
                {"tol", c.tol},               {"newton_max_iter", c.newton_max_iter}};
}

json params_report(int d, const ParamInputs& in, const std::string& mode_s) {
    const bool only_dp = in.p && !in.a && !in.b && !in.beta && !in.gamma && !in.Lambda;
    json j;
    if (only_dp && (mode_s.empty() || mode_s == "cylinder")) {
        const double p = *in.p;
        if (!(p > 2 && p < critical_exponent(d)))
            throw AdmissibilityError("p must lie in (2, 2d/(d-2))");
        CKNParams prm;
        prm.d = d;
        prm.mode = Mode::cylinder;
        prm.p = p;
        prm.theta = in.theta.value_or(1.0);
        Thresholds t;
        t.lambda_fs = lambda_fs(d, p);
        t.two_sharp = two_sharp(d);
        t.vartheta = vartheta(d, p);
        t.alpha_fs = alpha_fs(d, 2 * p / (p - 2));
        t.lambda_fs_theta = lambda_fs_theta(prm, prm.theta);
        j = to_json(t);
        j["d"] = d;
        j["p"] = p;
        j["theta"] = prm.theta;
        return j;
    }
    Mode mode;
    if (!mode_s.empty())
        mode = parse_mode(mode_s);
    else if (in.beta || in.gamma)
        mode = Mode::subcritical;
    else if (in.Lambda)
        mode = Mode::cylinder;
    else
        mode = Mode::critical;
    CKNParams prm = derive_params(d, in, mode);
    j = to_json(thresholds(prm));
    j["params"] = to_json(prm);
    if (mode != Mode::subcritical) {
        j["equivalence"] = to_json(check_equivalence(prm));
        j["optimal_constant_star"] = optimal_constant_star(prm);
    }
    return j;
}

std::shared_ptr<const ZonalBasis> sphere_basis(int d, int n) {
    return std::make_shared<ZonalBasis>(d, n);
}

// ---------------------------------------------------------------- sweep

struct SweepPoint {
    int index;
    int d;
    double p;
    std::optional<double> theta, Lambda;
};

std::vector<double> grid_axis(const json& g, const char* key, bool& present) {
    present = g.contains(key);
    if (!present) return {};
    std::vector<double> v;
    for (auto& x : g.at(key)) v.push_back(x.get<double>());
    return v;
}

int run_sweep(const std::string& spec_path, const std::string& out_dir, bool force, int jobs) {
    json spec = json::parse(read_text(spec_path));
    const std::string command = spec.value("command", "");
    static const std::set<std::string> allowed{"params", "branch", "curve", "criterion"};
    if (!allowed.count(command)) throw AdmissibilityError("sweep command must be one of params, branch, curve, criterion");
    const json grid = spec.value("grid", json::object());
    bool hd, hp, ht, hl;
    auto ds = grid_axis(grid, "d", hd), ps = grid_axis(grid, "p", hp), ts = grid_axis(grid, "theta", ht),
         ls = grid_axis(grid, "Lambda", hl);
    if (!hd || !hp) throw AdmissibilityError("sweep grid needs d and p");
    if (command == "curve" && !ht) throw AdmissibilityError("curve sweep needs a theta axis");
    std::vector<SweepPoint> pts;
    std::vector<std::optional<double>> tax, lax;
    if (ht) for (double t : ts) tax.push_back(t); else tax.push_back(std::nullopt);
    if (hl) for (double l : ls) lax.push_back(l); else lax.push_back(std::nullopt);
    for (double d : ds)
        for (double p : ps)
            for (auto& t : tax)
                for (auto& l : lax) pts.push_back({int(pts.size()), int(d), p, t, l});
    if (pts.empty()) throw DomainError("sweep grid is empty");
    if (fs::exists(out_dir)) {
        if (!force) throw CLI::ValidationError("--out", "directory " + out_dir + " exists (use --force)");
        fs::remove_all(out_dir);
    }
    fs::create_directories(out_dir);

    ContinuationConfig cfg;
    cfg.compute_eigs = false;
    const json o = spec.value("options", json::object());
    cfg.lambda_max = o.value("lambda_max", cfg.lambda_max);
    cfg.h = o.value("h", cfg.h);
    cfg.L = o.value("L", cfg.L);
    cfg.nz = o.value("nz", cfg.nz);

    // branches are shared per (d, p)
    std::map<std::pair<int, double>, std::shared_future<std::shared_ptr<Branch>>> branches;
    if (command == "branch" || command == "curve")
        for (auto& sp : pts) {
            auto key = std::make_pair(sp.d, sp.p);
            if (branches.count(key)) continue;
            branches[key] = std::async(std::launch::deferred, [=] {
                                return std::make_shared<Branch>(continue_branch(key.first, key.second, cfg));
                            }).share();
        }
    std::mutex bmu;
    auto get_branch = [&](int d, double p) {
        std::shared_future<std::shared_ptr<Branch>> f;
        {
            std::lock_guard<std::mutex> lk(bmu);
            f = branches.at({d, p});
        }
        return f.get();
    };

    struct Outcome {
        bool ok = false;
        std::string artifact, error, direction, turning, lambda_fs, breaking;
    };
    auto work = [&](const SweepPoint& sp) {
        Outcome oc;
        char name[32];
        std::snprintf(name, sizeof name, "point_%04d", sp.index);
        const fs::path dir = fs::path(out_dir) / name;
        fs::create_directories(dir);
        RunManifest man;
        man.command = command;
        man.parameters = {{"d", sp.d}, {"p", sp.p}, {"theta", sp.theta ? json(*sp.theta) : json(nullptr)},
                          {"Lambda", sp.Lambda ? json(*sp.Lambda) : json(nullptr)}};
        man.settings = settings_json(cfg);
        auto t0 = std::chrono::steady_clock::now();
        try {
            std::string path;
            if (command == "params") {
                ParamInputs in;
                in.p = sp.p;
                in.theta = sp.theta;
                in.Lambda = sp.Lambda;
                json j = params_report(sp.d, in, "");
                path = (dir / "params.json").string();
                write_text(path, j.dump(2) + "\n");
                oc.lambda_fs = fmt17(j.value("lambda_fs", std::nan("")));
            } else if (command == "branch") {
                auto br = get_branch(sp.d, sp.p);
                path = (dir / "branch.csv").string();
                write_text(path, branch_table(*br).str());
                oc.lambda_fs = fmt17(br->lambda_fs_exact);
            } else if (command == "curve") {
                auto br = get_branch(sp.d, sp.p);
                CurveB c = reparametrize(*br, *sp.theta);
                BifurcationClass bc = classify_bifurcation(c);
                path = (dir / "curve.csv").string();
                write_text(path, curve_table(c).str());
                oc.direction = to_string(bc.direction);
                oc.turning = std::to_string(bc.turning_points.size());
                oc.lambda_fs = fmt17(br->lambda_fs_exact);
            } else {
                CriterionReport r = lemma_criterion(sp.d, sp.p);
                path = (dir / "criterion.json").string();
                write_text(path, to_json(r).dump(2) + "\n");
                oc.breaking = r.breaking_predicted ? "true" : "false";
            }
            man.add_artifact(path);
            oc.artifact = fs::relative(path, out_dir).string();
            oc.ok = true;
        } catch (const std::exception& e) {
            oc.error = e.what();
        }
        man.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        man.write((dir / "manifest.json").string());
        return oc;
    };

    std::vector<Outcome> outcomes(pts.size());
    const int budget = std::max(1, jobs);
    for (size_t start = 0; start < pts.size(); start += budget) {
        std::vector<std::future<Outcome>> fut;
        for (size_t i = start; i < std::min(pts.size(), start + budget); ++i)
            fut.push_back(std::async(std::launch::async, work, pts[i]));
        for (size_t i = 0; i < fut.size(); ++i) outcomes[start + i] = fut[i].get();
    }

    CsvTable agg;
    agg.columns = {"index", "d", "p", "theta", "Lambda", "status", "artifact", "direction",
                   "turning_points", "lambda_fs", "breaking_predicted"};
    json failures = json::array();
    for (size_t i = 0; i < pts.size(); ++i) {
        const auto& sp = pts[i];
        const auto& oc = outcomes[i];
        agg.add_raw({std::to_string(sp.index), std::to_string(sp.d), fmt17(sp.p),
                     sp.theta ? fmt17(*sp.theta) : "", sp.Lambda ? fmt17(*sp.Lambda) : "",
                     oc.ok ? "ok" : "failed", oc.artifact, oc.direction, oc.turning, oc.lambda_fs,
                     oc.breaking});
        if (!oc.ok) failures.push_back({{"index", sp.index}, {"error", oc.error}});
    }
    write_text((fs::path(out_dir) / "aggregate.csv").string(), agg.str());
    RunManifest man;
    man.command = "sweep";
    man.parameters = spec;
    man.add_artifact((fs::path(out_dir) / "aggregate.csv").string());
    if (!failures.empty()) {
        write_text((fs::path(out_dir) / "failures.json").string(), failures.dump(2) + "\n");
        man.add_artifact((fs::path(out_dir) / "failures.json").string());
    }
    man.write((fs::path(out_dir) / "manifest.json").string());
    if (!failures.empty()) {
        std::cerr << "sweep: " << failures.size() << " grid point(s) failed:\n";
        for (auto& f : failures) std::cerr << "  point " << f["index"] << ": " << f["error"].get<std::string>() << "\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------- config layering

struct IniSection {
    std::vector<std::pair<std::string, std::string>> entries;
};

std::map<std::string, IniSection> parse_ini(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CLI::ValidationError("--config", "cannot read config file " + path);
    std::map<std::string, IniSection> out;
    std::string line, section;
    int lineno = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw CLI::ValidationError("--config", path + ":" + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--config", path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
        for (char& c : key)
            if (c == '_') c = '-';
        out[section].entries.emplace_back(key, val);
    }
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args_in) {
    CLI::App app{"cknlab: symmetry and symmetry breaking toolkit"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "config file (default: $CKNLAB_CONFIG)");

    // params
    auto* s_params = app.add_subcommand("params", "derived parameters and thresholds");
    int pd = 5;
    std::optional<double> pa, pb, pbeta, pgamma, pp, pL, ptheta;
    std::string pmode, pout;
    s_params->add_option("--d", pd)->check(CLI::Range(2, 64))->required();
    s_params->add_option("--mode", pmode)->check(CLI::IsMember({"critical", "subcritical", "cylinder"}));
    s_params->add_option("--a", pa)->check(CLI::Range(-1e6, 1e6));
    s_params->add_option("--b", pb)->check(CLI::Range(-1e6, 1e6));
    s_params->add_option("--beta", pbeta)->check(CLI::Range(-1e6, 1e6));
    s_params->add_option("--gamma", pgamma)->check(CLI::Range(-1e6, 1e6));
    s_params->add_option("--p", pp)->check(CLI::Range(1.0, 1e6));
    s_params->add_option("--Lambda", pL)->check(CLI::Range(0.0, 1e6));
    s_params->add_option("--theta", ptheta)->check(CLI::Range(0.0, 1.0));
    s_params->add_option("--out", pout, "JSON output (default stdout)");

    // flow
    auto* s_flow = app.add_subcommand("flow", "heat or fast-diffusion flow on the sphere");
    int fd = 3, fgrid = 64, fevery = 1;
    std::string fkind = "heat", fscheme = "implicit", fout;
    double fp = 2, feps = 0.3, fq = 2, ft = 1, fdt0 = 1e-4, fdtmax = 0.05;
    std::optional<double> fm;
    s_flow->add_option("--d", fd, "sphere dimension")->check(CLI::Range(1, 64))->capture_default_str();
    s_flow->add_option("--kind", fkind)->check(CLI::IsMember({"heat", "fde"}))->capture_default_str();
    s_flow->add_option("--p", fp)->check(CLI::Range(1.0, 1e3))->capture_default_str();
    s_flow->add_option("--m", fm, "fde exponent (default 1 - 1/n, n = 2p/(p-2))")->check(CLI::Range(0.0, 2.0));
    s_flow->add_option("--eps", feps, "initial density (1 + eps z)^q")->check(CLI::Range(0.0, 0.999))->capture_default_str();
    s_flow->add_option("--q", fq)->check(CLI::Range(0.0, 100.0))->capture_default_str();
    s_flow->add_option("--grid", fgrid)->check(CLI::Range(4, 1024))->capture_default_str();
    s_flow->add_option("--t-end", ft)->check(CLI::Range(0.0, 1e4))->capture_default_str();
    s_flow->add_option("--dt0", fdt0)->check(CLI::Range(1e-12, 1.0))->capture_default_str();
    s_flow->add_option("--dt-max", fdtmax)->check(CLI::Range(1e-12, 10.0))->capture_default_str();
    s_flow->add_option("--scheme", fscheme)->check(CLI::IsMember({"implicit", "exponential"}))->capture_default_str();
    s_flow->add_option("--sample-every", fevery)->check(CLI::Range(1, 1000000))->capture_default_str();
    s_flow->add_option("--out", fout, "CSV output (default stdout)");

    // counterexample
    auto* s_cx = app.add_subcommand("counterexample", "search for heat-flow deficit increase");
    int cd = 3;
    double cp = 5.5;
    SearchOptions copt;
    std::string cout_;
    s_cx->add_option("--d", cd)->check(CLI::Range(1, 64))->capture_default_str();
    s_cx->add_option("--p", cp)->check(CLI::Range(1.0, 1e3))->capture_default_str();
    s_cx->add_option("--grid", copt.grid_size)->check(CLI::Range(8, 1024))->capture_default_str();
    s_cx->add_option("--n-eps", copt.n_eps)->check(CLI::Range(1, 1000))->capture_default_str();
    s_cx->add_option("--n-q", copt.n_q)->check(CLI::Range(1, 1000))->capture_default_str();
    s_cx->add_option("--iters", copt.ascent_iters)->check(CLI::Range(0, 100000))->capture_default_str();
    s_cx->add_option("--out", cout_, "JSON output (default stdout)");

    // branch
    auto* s_branch = app.add_subcommand("branch", "continue the non-symmetric branch");
    BranchOpts bo;
    std::string bout;
    int bsnap = 0;
    bo.add(s_branch);
    s_branch->add_option("--out", bout, "CSV output (default stdout)");
    s_branch->add_option("--snapshot-every", bsnap, "write every k-th field as CSV next to --out")
        ->check(CLI::Range(0, 100000));

    // curve
    auto* s_curve = app.add_subcommand("curve", "reparametrised curve B at a given theta");
    BranchOpts co;
    double ctheta = 1;
    std::string ccout, cclass;
    co.add(s_curve);
    s_curve->add_option("--theta", ctheta)->check(CLI::Range(0.0, 1.0))->required();
    s_curve->add_option("--out", ccout, "CSV output (default stdout)");
    s_curve->add_option("--class-out", cclass, "classification JSON");

    // criterion
    auto* s_crit = app.add_subcommand("criterion", "Gagliardo-Nirenberg symmetry breaking criterion");
    int kd = 5;
    double kp = 2.8;
    bool kbranch = false;
    std::string kout;
    s_crit->add_option("--d", kd)->check(CLI::Range(2, 64))->required();
    s_crit->add_option("--p", kp)->check(CLI::Range(2.0, 1e6))->required();
    s_crit->add_flag("--with-branch", kbranch, "tighten the bracket with the curve at theta = vartheta");
    s_crit->add_option("--out", kout, "JSON output (default stdout)");

    // probe
    auto* s_probe = app.add_subcommand("probe", "theta scan of the bifurcation picture");
    BranchOpts po;
    std::vector<double> pthetas{1.0, 0.9, 0.718};
    bool pvt = false;
    std::string prout;
    po.add(s_probe);
    s_probe->add_option("--thetas", pthetas)->delimiter(',')->check(CLI::Range(0.0, 1.0))->capture_default_str();
    s_probe->add_flag("--with-vartheta", pvt, "append theta = vartheta(p)");
    s_probe->add_option("--out", prout, "JSON output (default stdout)");

    // verify
    auto* s_verify = app.add_subcommand("verify", "run the invariant suite");
    std::string vout;
    bool vquick = false;
    s_verify->add_flag("--quick", vquick, "skip the continuation checks");
    s_verify->add_option("--out", vout, "JSON report");

    // sweep
    auto* s_sweep = app.add_subcommand("sweep", "Cartesian parameter sweep from a JSON spec");
    std::string sspec, sout;
    bool sforce = false;
    int sjobs = 2;
    s_sweep->add_option("--spec", sspec)->required()->check(CLI::ExistingFile);
    s_sweep->add_option("--out", sout)->required();
    s_sweep->add_flag("--force", sforce, "replace an existing output directory");
    s_sweep->add_option("--jobs", sjobs)->check(CLI::Range(1, 256))->capture_default_str();

    try {
        // layering: defaults < config section < command line
        std::vector<std::string> args = args_in;
        std::string cfg_file;
        std::string subname;
        for (size_t i = 1; i < args.size(); ++i) {
            const std::string& a = args[i];
            if (a == "--config" && i + 1 < args.size()) {
                cfg_file = args[++i];
            } else if (a.rfind("--config=", 0) == 0) {
                cfg_file = a.substr(9);
            } else if (a.empty() || a[0] != '-') {
                subname = a;
                break;
            }
        }
        if (cfg_file.empty())
            if (const char* env = std::getenv("CKNLAB_CONFIG")) cfg_file = env;
        if (!cfg_file.empty() && !subname.empty()) {
            CLI::App* sub = nullptr;
            for (CLI::App* s : app.get_subcommands({}))
                if (s->get_name() == subname) sub = s;
            if (sub) {
                auto ini = parse_ini(cfg_file);
                for (auto& [sec, body] : ini)
                    if (!sec.empty() && !app.get_subcommand_no_throw(sec))
                        throw CLI::ValidationError("--config", "unknown section [" + sec + "] in " + cfg_file);
                std::vector<std::string> injected;
                auto it = ini.find(subname);
                if (it != ini.end()) {
                    for (auto& [key, val] : it->second.entries) {
                        const CLI::Option* o = sub->get_option_no_throw("--" + key);
                        if (!o || key == "help")
                            throw CLI::ValidationError("--config", "unknown key '" + key + "' in [" + subname + "]");
                        if (o->get_expected_min() == 0) {
                            if (val == "true" || val == "1" || val == "yes") injected.push_back("--" + key);
                            else if (!(val == "false" || val == "0" || val == "no"))
                                throw CLI::ValidationError("--" + key, "flag value must be true or false");
                        } else {
                            injected.push_back("--" + key);
                            injected.push_back(val);
                        }
                    }
                }
                auto pos = std::find(args.begin() + 1, args.end(), subname);
                args.insert(pos + 1, injected.begin(), injected.end());
            }
        }
        std::vector<const char*> cargv;
        for (auto& a : args) cargv.push_back(a.c_str());
        app.parse(int(cargv.size()), cargv.data());

        if (*s_params) {
            ManifestScope ms("params", s_params);
            ParamInputs in;
            in.a = pa, in.b = pb, in.beta = pbeta, in.gamma = pgamma, in.p = pp, in.Lambda = pL,
            in.theta = ptheta;
            json j = params_report(pd, in, pmode);
            emit(pout, j.dump(2) + "\n");
            ms.add(pout);
            ms.finish(pout);
        } else if (*s_flow) {
            ManifestScope ms("flow", s_flow);
            FlowSpec spec;
            spec.kind = fkind == "heat" ? FlowKind::heat : FlowKind::fde;
            spec.p = fp;
            if (spec.kind == FlowKind::fde) {
                if (fm) {
                    spec.m = *fm;
                } else {
                    if (!(fp > 2)) throw AdmissibilityError("default m needs p > 2");
                    spec.m = 1 - (fp - 2) / (2 * fp);
                }
            }
            spec.grid_size = fgrid;
            spec.t_end = ft;
            spec.policy.dt0 = fdt0;
            spec.policy.dt_max = fdtmax;
            spec.heat_scheme = fscheme == "implicit" ? HeatScheme::implicit_euler : HeatScheme::exponential;
            validate(spec);
            auto basis = sphere_basis(fd, fgrid);
            FlowState st = make_state(ascent_density(basis, {feps, fq, 0, 0}));
            Trajectory tr = integrate(st, spec, fevery);
            ms.manifest().settings = {{"steps", tr.steps}, {"rejected", tr.rejected}, {"m", spec.m}};
            emit(fout, trajectory_table(tr).str());
            ms.add(fout);
            ms.finish(fout);
        } else if (*s_cx) {
            ManifestScope ms("counterexample", s_cx);
            json j;
            try {
                CounterexampleResult r = counterexample_search(cd, cp, copt);
                j["found"] = true;
                j["eps"] = r.x[0], j["q"] = r.x[1], j["b2"] = r.x[2], j["b3"] = r.x[3];
                j["derivative"] = r.derivative;
                j["error"] = r.error;
                j["nodes"] = r.rho0.nodes;
                j["density"] = r.rho0.values;
                j["trace_length"] = r.trace.size();
                emit(cout_, j.dump(2) + "\n");
                ms.add(cout_);
                ms.finish(cout_);
            } catch (const SearchFailed& e) {
                j["found"] = false;
                j["best_value"] = e.best_value;
                emit(cout_, j.dump(2) + "\n");
                ms.add(cout_);
                ms.finish(cout_);
                throw;
            }
        } else if (*s_branch) {
            ManifestScope ms("branch", s_branch);
            ContinuationConfig cfg = bo.config();
            Branch br = continue_branch(bo.d, bo.p, cfg);
            ms.manifest().settings = settings_json(cfg);
            ms.manifest().settings["lambda_fs_grid"] = br.lambda_fs_grid;
            ms.manifest().settings["branch_eps"] = br.branch_eps;
            emit(bout, branch_table(br).str());
            ms.add(bout);
            if (bsnap > 0 && !bout.empty() && bout != "-") {
                for (size_t i = 0; i < br.points.size(); i += bsnap) {
                    std::string fp_ = bout + ".field_" + std::to_string(i) + ".csv";
                    write_text(fp_, field_table(*br.points[i].field).str());
                    ms.add(fp_);
                }
            }
            ms.finish(bout);
        } else if (*s_curve) {
            ManifestScope ms("curve", s_curve);
            ContinuationConfig cfg = co.config();
            Branch br = continue_branch(co.d, co.p, cfg);
            CurveB c = reparametrize(br, ctheta);
            ms.manifest().settings = settings_json(cfg);
            emit(ccout, curve_table(c).str());
            ms.add(ccout);
            if (!cclass.empty()) {
                write_text(cclass, to_json(classify_bifurcation(c)).dump(2) + "\n");
                ms.add(cclass);
            }
            ms.finish(ccout);
        } else if (*s_crit) {
            ManifestScope ms("criterion", s_crit);
            CriterionReport r;
            if (kbranch) {
                ContinuationConfig cfg;
                cfg.compute_eigs = false;
                Branch br = continue_branch(kd, kp, cfg);
                CurveB c = reparametrize(br, vartheta(kd, kp), false);
                r = lemma_criterion(kd, kp, &c);
            } else {
                r = lemma_criterion(kd, kp);
            }
            emit(kout, to_json(r).dump(2) + "\n");
            ms.add(kout);
            ms.finish(kout);
        } else if (*s_probe) {
            ManifestScope ms("probe", s_probe);
            ContinuationConfig cfg = po.config();
            Branch br = continue_branch(po.d, po.p, cfg);
            std::vector<double> th = pthetas;
            if (pvt) th.push_back(vartheta(po.d, po.p));
            ProbeReport r = conjecture_probe(br, th);
            ms.manifest().settings = settings_json(cfg);
            emit(prout, to_json(r).dump(2) + "\n");
            ms.add(prout);
            ms.finish(prout);
        } else if (*s_verify) {
            ManifestScope ms("verify", s_verify);
            auto checks = run_invariant_suite(vquick);
            bool all = true;
            json rep = json::array();
            for (auto& c : checks) {
                std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << " : " << c.detail << "\n";
                all = all && c.ok;
                rep.push_back({{"name", c.name}, {"ok", c.ok}, {"detail", c.detail}});
            }
            if (!vout.empty()) {
                write_text(vout, rep.dump(2) + "\n");
                ms.add(vout);
                ms.finish(vout);
            }
            return all ? 0 : 4;
        } else if (*s_sweep) {
            return run_sweep(sspec, sout, sforce, sjobs);
        }
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "invalid JSON: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> a(argv, argv + argc);
    return run(a);
}

}  // namespace cknlab
