#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmvib/core/error.hpp"
#include "mmvib/core/io.hpp"
#include "mmvib/pipeline/pipeline.hpp"

namespace mmvib::pipeline {
namespace {

constexpr const char* kDoneMarker = "DONE";

std::string cell_name(std::size_t index, double distance, std::size_t speakers, std::size_t objects,
                      synth::Arrangement a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "cell%03zu_d%.2f_s%zu_o%zu_%s", index, distance, speakers, objects,
                synth::to_string(a).c_str());
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

// Reads back the single data row of a finished cell's metrics.csv.
metrics::EvaluationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string header, row;
  require(std::getline(in, header) && std::getline(in, row), ErrorKind::Io, "cannot read " + path.string());
  const auto v = split(row);
  require(v.size() == 9, ErrorKind::Io, "malformed metrics file " + path.string());
  metrics::EvaluationReport r;
  r.seed = std::stoull(v[0]);
  r.config_fingerprint = v[1];
  r.speakers_true = std::stoul(v[2]);
  r.speakers_estimated = std::stoul(v[3]);
  r.success_rate = std::stod(v[4]);
  r.snr_db = std::stod(v[5]);
  r.psnr_db = std::stod(v[6]);
  r.baseline_snr_db = std::stod(v[7]);
  r.baseline_psnr_db = std::stod(v[8]);
  return r;
}

}  // namespace

std::vector<SweepCell> sweep_cells(const ExperimentConfig& config) {
  require(!config.sweep.empty(), ErrorKind::Parameter, "sweep needs at least one non-empty axis");
  const auto& l = config.scene.layout;
  const auto& a = config.sweep;
  const std::vector<double> ds = a.distance.empty() ? std::vector<double>{l.distance} : a.distance;
  const auto ss = a.speakers.empty() ? std::vector<std::size_t>{l.speakers} : a.speakers;
  const auto os = a.objects.empty() ? std::vector<std::size_t>{l.objects} : a.objects;
  const auto as = a.arrangement.empty() ? std::vector<synth::Arrangement>{l.arrangement} : a.arrangement;

  std::vector<SweepCell> cells;
  for (double d : ds)
    for (auto s : ss)
      for (auto o : os)
        for (auto arr : as) {
          SweepCell c;
          c.name = cell_name(cells.size(), d, s, o, arr);
          c.config = config;
          c.config.sweep = {};
          c.config.scene.layout.distance = d;
          c.config.scene.layout.speakers = s;
          c.config.scene.layout.objects = o;
          c.config.scene.layout.arrangement = arr;
          // Fewer objects than requested targets: select what exists.
          c.config.pipeline.targets = std::min(config.pipeline.targets, o);
          c.config.output_dir = config.output_dir / c.name;
          cells.push_back(std::move(c));
        }
  return cells;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto cells = sweep_cells(config);
  const std::filesystem::path root = config.output_dir.is_absolute() ? config.output_dir : output_root() / config.output_dir;
  std::filesystem::create_directories(root);

  std::vector<SweepRow> rows;
  for (const auto& cell : cells) {
    SweepRow row;
    row.cell = cell.name;
    row.distance = cell.config.scene.layout.distance;
    row.speakers = cell.config.scene.layout.speakers;
    row.objects = cell.config.scene.layout.objects;
    row.arrangement = cell.config.scene.layout.arrangement;
    const auto cell_dir = root / cell.name;
    if (std::filesystem::exists(cell_dir / kDoneMarker)) {
      row.status = "ok";
      row.report = read_report(cell_dir / "metrics.csv");
    } else {
      try {
        auto cfg = cell.config;
        cfg.output_dir = cell_dir;
        row.report = run_pipeline(cfg).report;
        row.status = "ok";
        std::ofstream(cell_dir / kDoneMarker) << "ok\n";
      } catch (const Error& e) {
        row.status = e.what();
      }
    }
    rows.push_back(std::move(row));
  }

  io::CsvWriter csv(root / "sweep.csv");
  csv.header({"cell", "distance_m", "speakers", "objects", "arrangement", "status", "success_rate", "snr_db", "psnr_db",
              "baseline_snr_db", "baseline_psnr_db", "speakers_estimated"});
  for (const auto& r : rows) {
    csv.cell(r.cell).cell(r.distance).cell(r.speakers).cell(r.objects).cell(synth::to_string(r.arrangement));
    csv.cell(r.status).cell(r.report.success_rate).cell(r.report.snr_db).cell(r.report.psnr_db);
    csv.cell(r.report.baseline_snr_db).cell(r.report.baseline_psnr_db).cell(r.report.speakers_estimated);
    csv.end_row();
  }
  return rows;
}

}  // namespace mmvib::pipeline
