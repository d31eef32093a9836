#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>

#include "protshape/cli.hpp"
#include "protshape/gvae.hpp"
#include "protshape/io.hpp"
#include "protshape/pdb_ingest.hpp"
#include "support/pdb_fixtures.hpp"
#include "support/synthetic.hpp"

using namespace protshape;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("cli_scratch") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  return json::parse(f);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

// A directory of fragment CSVs cut from mild warps of one base curve.
fs::path fragment_dir(const std::string& name, int count, int points,
                      std::uint64_t seed) {
  const fs::path dir = fresh_dir(name);
  std::mt19937_64 rng(seed);
  const testsupport::SmoothCurve base = testsupport::SmoothCurve::random(rng);
  for (int i = 0; i < count; ++i) {
    Curve c;
    if (i == 0) {
      c = base.sample(points);
    } else {
      const auto warp = testsupport::SmoothWarp::random(rng, 2, 0.35);
      c.points.reserve(points);
      for (int k = 0; k < points; ++k)
        c.points.push_back(base(warp(static_cast<double>(k) / (points - 1))));
      const Rotation R = testsupport::random_rotation(rng);
      for (auto& p : c.points) p = R.m * p;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frag_%03d.csv", i);
    io::write_curve_csv(dir / buf, c);
  }
  return dir;
}

int run_cli(std::vector<std::string> args) { return cli::run(args); }

}  // namespace

TEST_CASE("ingest: one 48-residue chain yields one fragment") {
  const fs::path in = fresh_dir("ingest_in");
  const fs::path out = fresh_dir("ingest_out");
  write_file(in / "toy.pdb", testsupport::backbone_pdb(48));
  CHECK(run_cli({"ingest", "--input", (in / "toy.pdb").string(), "--chain", "A",
                 "--fragment-atoms", "144", "--stride", "3", "--output-dir",
                 out.string()}) == 0);
  CHECK(fs::exists(out / "frag_000000.csv"));
  const json manifest = read_json(out / "manifest.json");
  CHECK(manifest["details"]["fragments"].size() == 1);
  CHECK(manifest["details"]["fragments"]["frag_000000.csv"]["chain"] == "A");
  const Curve frag = io::read_curve_csv(out / "frag_000000.csv");
  CHECK(frag.size() == 144);
}

TEST_CASE("ingest: malformed file is a warning, not a failure") {
  const fs::path in = fresh_dir("ingest_mixed");
  const fs::path out = fresh_dir("ingest_mixed_out");
  write_file(in / "a_good.pdb", testsupport::backbone_pdb(48));
  write_file(in / "b_bad.pdb", "ATOM  broken\n");
  CHECK(run_cli({"ingest", "--input", in.string(), "--output-dir", out.string()}) == 0);
  const json manifest = read_json(out / "manifest.json");
  CHECK(manifest["warnings"].size() >= 1);
  CHECK(manifest["details"]["fragments"].size() == 1);
}

TEST_CASE("ingest: nonexistent input is a hard error") {
  const fs::path out = fresh_dir("ingest_missing_out");
  CHECK(run_cli({"ingest", "--input", "does_not_exist.pdb", "--output-dir",
                 out.string()}) == 1);
}

TEST_CASE("ingest: short chain gives empty-result exit code") {
  const fs::path in = fresh_dir("ingest_short");
  const fs::path out = fresh_dir("ingest_short_out");
  write_file(in / "short.pdb", testsupport::backbone_pdb(20));
  CHECK(run_cli({"ingest", "--input", in.string(), "--output-dir", out.string()}) == 2);
}

TEST_CASE("distance: single fragment gives a 1x1 zero matrix") {
  const fs::path in = fragment_dir("dist_single", 1, 49, 41);
  const fs::path out = fresh_dir("dist_single_out");
  CHECK(run_cli({"distance", "--input", in.string(), "--method", "dp",
                 "--output-dir", out.string()}) == 0);
  std::ifstream f(out / "distances.csv");
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  CHECK(header == ",frag_000");
  CHECK(row == "frag_000,0");
}

TEST_CASE("distance: duplicated fragment has near-zero off-diagonal") {
  const fs::path in = fresh_dir("dist_dup");
  std::mt19937_64 rng(42);
  const Curve c = testsupport::random_smooth_curve(49, rng);
  io::write_curve_csv(in / "a.csv", c);
  io::write_curve_csv(in / "b.csv", c);
  const fs::path out = fresh_dir("dist_dup_out");
  CHECK(run_cli({"distance", "--input", in.string(), "--output-dir",
                 out.string()}) == 0);
  std::ifstream f(out / "distances.csv");
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  const double off = std::stod(row.substr(row.find(',', 2) + 1));
  CHECK(off == 0.0);  // identical files load to bitwise-equal srvfs
}

TEST_CASE("distance: dp and resnet matrices mostly agree on a mild suite") {
  const fs::path in = fragment_dir("dist_suite", 5, 49, 43);
  const fs::path out_dp = fresh_dir("dist_suite_dp");
  const fs::path out_rn = fresh_dir("dist_suite_rn");
  CHECK(run_cli({"distance", "--input", in.string(), "--method", "dp",
                 "--output-dir", out_dp.string()}) == 0);
  CHECK(run_cli({"distance", "--input", in.string(), "--method", "resnet",
                 "--epochs", "400", "--resnet-blocks", "4", "--resnet-channels",
                 "16", "--seed", "3", "--output-dir", out_rn.string()}) == 0);
  auto load_matrix = [](const fs::path& p) {
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);  // header
    std::vector<std::vector<double>> m;
    while (std::getline(f, line)) {
      std::vector<double> row;
      std::size_t at = line.find(',');
      while (at != std::string::npos) {
        const std::size_t next = line.find(',', at + 1);
        row.push_back(std::stod(line.substr(at + 1, next - at - 1)));
        at = next;
      }
      m.push_back(row);
    }
    return m;
  };
  const auto dp = load_matrix(out_dp / "distances.csv");
  const auto rn = load_matrix(out_rn / "distances.csv");
  int close = 0, entries = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      if (i == j) {
        CHECK(dp[i][j] == 0.0);
        CHECK(rn[i][j] == 0.0);
        continue;
      }
      ++entries;
      if (std::abs(dp[i][j] - rn[i][j]) < 0.15) ++close;
    }
  CHECK(close >= entries * 7 / 10);
}

TEST_CASE("geodesic and register round trip through the CLI") {
  const fs::path in = fragment_dir("geo", 2, 49, 44);
  const fs::path a = in / "frag_000.csv";
  const fs::path b = in / "frag_001.csv";

  SUBCASE("identical inputs give a constant path in any space") {
    const fs::path out = fresh_dir("geo_const");
    CHECK(run_cli({"geodesic", "--input", a.string(), "--input", a.string(),
                   "--space", "preshape", "--steps", "5", "--output-dir",
                   out.string()}) == 0);
    const json path = read_json(out / "path.json");
    for (const auto& chord : path["chord_distances"]) CHECK(chord.get<double>() == 0.0);
  }
  SUBCASE("shape end-to-end distance never exceeds preshape") {
    const fs::path out_p = fresh_dir("geo_pre");
    const fs::path out_s = fresh_dir("geo_shape");
    CHECK(run_cli({"geodesic", "--input", a.string(), "--input", b.string(),
                   "--space", "preshape", "--steps", "5", "--output-dir",
                   out_p.string()}) == 0);
    CHECK(run_cli({"geodesic", "--input", a.string(), "--input", b.string(),
                   "--space", "shape", "--steps", "5", "--output-dir",
                   out_s.string()}) == 0);
    auto total = [](const json& p) {
      double s = 0;
      for (const auto& c : p["chord_distances"]) s += c.get<double>();
      return s;
    };
    CHECK(total(read_json(out_s / "path.json")) <=
          total(read_json(out_p / "path.json")) + 1e-9);
  }
  SUBCASE("latent mode without a checkpoint is a hard error") {
    const fs::path out = fresh_dir("geo_latent_err");
    CHECK(run_cli({"geodesic", "--input", a.string(), "--input", b.string(),
                   "--space", "latent", "--output-dir", out.string()}) == 1);
  }
  SUBCASE("register reports for both methods") {
    const fs::path out_dp = fresh_dir("reg_dp");
    CHECK(run_cli({"register", "--input", a.string(), "--input", b.string(),
                   "--method", "dp", "--output-dir", out_dp.string()}) == 0);
    const json dp_report = read_json(out_dp / "report.json");
    CHECK(dp_report["theta"].get<double>() >= 0.0);
    CHECK(dp_report["cost_history"].size() >= 1);

    const fs::path out_rn = fresh_dir("reg_rn");
    CHECK(run_cli({"register", "--input", a.string(), "--input", b.string(),
                   "--method", "resnet", "--epochs", "200", "--resnet-blocks",
                   "2", "--resnet-channels", "8", "--seed", "5", "--output-dir",
                   out_rn.string()}) == 0);
    const json rn_report = read_json(out_rn / "report.json");
    CHECK(rn_report["comparison"]["dp_theta"].get<double>() >= 0.0);
    CHECK(rn_report["cost"].get<double>() <=
          rn_report["identity_cost"].get<double>() + 1e-12);
  }
}

TEST_CASE("train, generate, inpaint pipeline") {
  // 21-point fragments: grid 20, 7 residues.
  const fs::path data = fresh_dir("pipeline_data");
  std::mt19937_64 rng(45);
  const auto fragments = testsupport::synthetic_fragment_corpus(24, 21, rng);
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frag_%03zu.csv", i);
    io::write_curve_csv(data / buf, fragments[i]);
  }

  const fs::path model_dir = fresh_dir("pipeline_model");
  CHECK(run_cli({"train", "--input", data.string(), "--kappa", "500",
                 "--latent-dim", "6", "--epochs", "25", "--batch-size", "8",
                 "--lr", "2e-3", "--seed", "9", "--output-dir",
                 model_dir.string()}) == 0);
  REQUIRE(fs::exists(model_dir / "gvae.ckpt"));
  const json history = read_json(model_dir / "history.json");
  CHECK(history["epoch_loss"].size() == 25);

  SUBCASE("train with lr = 0 has a flat loss history") {
    const fs::path flat_dir = fresh_dir("pipeline_flat");
    CHECK(run_cli({"train", "--input", data.string(), "--kappa", "1e8",
                   "--latent-dim", "6", "--epochs", "6", "--batch-size", "8",
                   "--lr", "0", "--seed", "9", "--output-dir",
                   flat_dir.string()}) == 0);
    const json flat = read_json(flat_dir / "history.json");
    const double first = flat["epoch_loss"][0].get<double>();
    for (const auto& l : flat["epoch_loss"])
      CHECK(std::abs(l.get<double>() - first) / first < 1e-3);
  }

  SUBCASE("generate honors the count contract and writes backbone PDBs") {
    const fs::path gen_dir = fresh_dir("pipeline_gen");
    CHECK(run_cli({"generate", "--checkpoint", (model_dir / "gvae.ckpt").string(),
                   "--n", "3", "--seed", "11", "--output-dir",
                   gen_dir.string()}) == 0);
    for (int i = 0; i < 3; ++i) {
      char base[32];
      std::snprintf(base, sizeof(base), "gen_%03d", i);
      CHECK(fs::exists(gen_dir / (std::string(base) + ".csv")));
      CHECK(fs::exists(gen_dir / (std::string(base) + ".pdb")));
    }
    // PDB output parses back through our own reader: 7 residues, N/CA/C.
    const std::ifstream pf(gen_dir / "gen_000.pdb");
    std::stringstream ss;
    ss << pf.rdbuf();
    const auto records = parse_pdb(ss.str());
    CHECK(records.size() == 21);
  }

  SUBCASE("generate with a novelty corpus emits the scan") {
    const fs::path gen_dir = fresh_dir("pipeline_gen_novelty");
    CHECK(run_cli({"generate", "--checkpoint", (model_dir / "gvae.ckpt").string(),
                   "--n", "2", "--input", data.string(), "--seed", "11",
                   "--output-dir", gen_dir.string()}) == 0);
    std::ifstream nf(gen_dir / "novelty.csv");
    std::string line;
    int rows = 0;
    std::getline(nf, line);
    CHECK(line == "sample,nearest,shape_distance");
    while (std::getline(nf, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 2);
  }

  SUBCASE("inpaint emits an RMSD report") {
    const fs::path inp_dir = fresh_dir("pipeline_inpaint");
    CHECK(run_cli({"inpaint", "--checkpoint", (model_dir / "gvae.ckpt").string(),
                   "--input", (data / "frag_020.csv").string(),
                   "--mask-residues", "2", "--iters", "60", "--seed", "13",
                   "--output-dir", inp_dir.string()}) == 0);
    const json report = read_json(inp_dir / "report.json");
    CHECK(report["rmsd_model"].get<double>() >= 0.0);
    CHECK(report["rmsd_baseline"].get<double>() >= 0.0);
    CHECK(report["masked_atoms"].get<int>() == 6);
    CHECK(fs::exists(inp_dir / "completed.csv"));
  }

  SUBCASE("identical run configs give byte-identical outputs") {
    const fs::path g1 = fresh_dir("repro_a");
    const fs::path g2 = fresh_dir("repro_b");
    for (const fs::path& dir : {g1, g2})
      CHECK(run_cli({"generate", "--checkpoint", (model_dir / "gvae.ckpt").string(),
                     "--n", "2", "--seed", "21", "--output-dir",
                     dir.string()}) == 0);
    CHECK(io::file_hash(g1 / "gen_000.csv") == io::file_hash(g2 / "gen_000.csv"));
    CHECK(io::file_hash(g1 / "gen_001.pdb") == io::file_hash(g2 / "gen_001.pdb"));
  }
}

TEST_CASE("vmf-sample writes samples and stats") {
  const fs::path out = fresh_dir("vmf_out");
  CHECK(run_cli({"vmf-sample", "--m", "3", "--kappa", "2", "--n", "5000",
                 "--seed", "17", "--output-dir", out.string()}) == 0);
  std::ifstream f(out / "samples.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line == "index,z0,z1,z2");
  int rows = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 5000);
  const json stats = read_json(out / "stats.json");
  const double emp = stats["empirical_mean_dot"].get<double>();
  const double ana = stats["analytic_mean_resultant_length"].get<double>();
  CHECK(std::abs(emp - ana) < 0.05);
}

TEST_CASE("every run writes a manifest naming config and hashed outputs") {
  const fs::path out = fresh_dir("manifest_check");
  CHECK(run_cli({"vmf-sample", "--m", "4", "--kappa", "1", "--n", "10",
                 "--seed", "19", "--output-dir", out.string()}) == 0);
  const json manifest = read_json(out / "manifest.json");
  CHECK(manifest["command"] == "vmf-sample");
  CHECK(manifest["config"]["seed"] == 19);
  REQUIRE(manifest["outputs"].size() >= 2);
  for (const auto& o : manifest["outputs"])
    CHECK(o["fnv1a64"].get<std::string>().size() == 16);
}
