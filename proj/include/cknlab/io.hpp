#pragma once

#include "cknlab/branch_analysis.hpp"
#include "cknlab/cylinder.hpp"
#include "cknlab/params.hpp"
#include "cknlab/sphere_flows.hpp"

#include <json.hpp>
#include <string>
#include <vector>

namespace cknlab {

using json = nlohmann::ordered_json;

// 17 significant digits
std::string fmt17(double x);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(const std::vector<double>& row);
    void add_raw(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    std::string str() const;
};

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

CsvTable branch_table(const Branch& b);
CsvTable curve_table(const CurveB& c);
CsvTable trajectory_table(const Trajectory& t);
// nodes, values of a field snapshot (full s-grid x zonal nodes)
CsvTable field_table(const CylinderField& f);

json to_json(const CKNParams& prm);
json to_json(const Thresholds& t);
json to_json(const Equivalence& e);
json to_json(const CriterionReport& r);
json to_json(const BifurcationClass& b);
json to_json(const ProbeReport& r);

std::string sha256_file(const std::string& path);

struct Artifact {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string command;
    json parameters = json::object();
    json settings = json::object();
    double wall_clock = 0;  // seconds
    std::vector<Artifact> artifacts;

    void add_artifact(const std::string& path);
    json to_json() const;
    // writes <path> and returns it
    std::string write(const std::string& path) const;
};

}  // namespace cknlab
