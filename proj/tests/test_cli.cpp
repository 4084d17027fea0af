#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pamlab/rates.hpp"

namespace {

const std::string kBin = PAMLAB_BIN;

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args;
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out << text;
}

double field(const std::string& csv_line, std::size_t idx) {
  std::istringstream in(csv_line);
  std::string tok;
  for (std::size_t i = 0; i <= idx; ++i) REQUIRE(std::getline(in, tok, ','));
  return std::strtod(tok.c_str(), nullptr);
}

}  // namespace

TEST_CASE("rates writes the table and a finalized manifest") {
  REQUIRE(run("rates --out cli_rates --N 10,100 --C 1 --t 2") == 0);
  const std::string csv = slurp("cli_rates/rates/rates.csv");
  CHECK(first_line(csv) == pamlab::kRateTableHeader);
  CHECK(count_lines(csv) == 3);
  const auto man =
      nlohmann::json::parse(slurp("cli_rates/rates/manifest.json"));
  CHECK(man.at("status") == "ok");
  CHECK(man.at("master_seed").is_null());
}

TEST_CASE("an unsolvable rate surfaces as exit 3 with a machine readable error") {
  const int rc = run("rates --out cli_rates_bad --N 5 2> cli_rates_bad_err.txt");
  CHECK(rc == 3);
  const std::string err = slurp("cli_rates_bad_err.txt");
  CHECK(err.find("\"kind\":\"numerical\"") != std::string::npos);
  CHECK(err.find("\"exit\":3") != std::string::npos);
  const auto man =
      nlohmann::json::parse(slurp("cli_rates_bad/rates/manifest.json"));
  CHECK(man.at("status") == "error");
}

TEST_CASE("sampling commands demand a master seed") {
  CHECK(run("moment-mc --out cli_m0 --kernel family=atoms,dim=1,w=0.7,xi=0 "
            "--N 1 --t 1 --samples 200 2> /dev/null") == 2);
}

TEST_CASE("the constant kernel moment comes out exactly") {
  REQUIRE(run("moment-mc --out cli_m1 --kernel family=atoms,dim=1,w=0.7,xi=0 "
              "--N 1 --t 1 --steps 8 --samples 150 --seed 7") == 0);
  const std::string csv = slurp("cli_m1/moment-mc/moment.csv");
  REQUIRE(count_lines(csv) == 2);
  const std::string row = csv.substr(csv.find('\n') + 1);
  CHECK(std::fabs(field(row, 0) - 0.35) <= 1e-12);
  CHECK(field(row, 1) == 0.0);
}

TEST_CASE("the worker count never changes the numbers") {
  const std::string common =
      "moment-mc --out cli_w --kernel family=atoms,dim=1,w=0.7,xi=1.3 "
      "--N 2 --t 0.5 --steps 16 --samples 400 --seed 99 ";
  REQUIRE(run(common + "--workers 1 --experiment w1") == 0);
  REQUIRE(run(common + "--workers 4 --experiment w4") == 0);
  const std::string a = slurp("cli_w/w1/moment.csv");
  const std::string b = slurp("cli_w/w4/moment.csv");
  CHECK(!a.empty());
  CHECK(a == b);
}

TEST_CASE("config files fill in unset flags and flags win") {
  write_text("cli_cfg.ini", "# shared settings\nseed = 11\nsamples = 150\n");
  const std::string common =
      "moment-mc --out cli_cfg --kernel family=atoms,dim=1,w=0.7,xi=0 "
      "--N 1 --t 0.5 --steps 4 --config cli_cfg.ini ";
  REQUIRE(run(common + "--experiment from_file") == 0);
  auto man = nlohmann::json::parse(slurp("cli_cfg/from_file/manifest.json"));
  CHECK(man.at("master_seed").get<std::uint64_t>() == 11);
  REQUIRE(run(common + "--experiment flag_wins --seed 12") == 0);
  man = nlohmann::json::parse(slurp("cli_cfg/flag_wins/manifest.json"));
  CHECK(man.at("master_seed").get<std::uint64_t>() == 12);
  write_text("cli_cfg_bad.ini", "seed = 11\nbogus = 3\n");
  CHECK(run("moment-mc --out cli_cfg --experiment bad "
            "--kernel family=atoms,dim=1,w=0.7,xi=0 --N 1 --t 0.5 "
            "--steps 4 --samples 150 --config cli_cfg_bad.ini 2> /dev/null") ==
        2);
}

TEST_CASE("kernel tabulation refuses a singular left endpoint") {
  CHECK(run("kernel-eval --out cli_ke --kernel family=riesz,alpha=0.5,dim=1 "
            "--r-min 0 --r-max 2 --n 5 2> /dev/null") == 2);
  REQUIRE(run("kernel-eval --out cli_ke --kernel family=riesz,alpha=0.5,dim=1 "
              "--r-min 0.1 --r-max 2 --n 5") == 0);
  const std::string csv = slurp("cli_ke/kernel-eval/kernel_eval.csv");
  CHECK(first_line(csv) == "r,value");
  CHECK(count_lines(csv) == 6);
  const std::string row = csv.substr(csv.find('\n') + 1);
  CHECK(std::fabs(field(row, 1) - 1.0 / std::sqrt(0.1)) <= 1e-12);
}

TEST_CASE("the spectral integrability verdict lands in a csv") {
  REQUIRE(run("dalang --out cli_da --kernel family=riesz,alpha=0.5,dim=1") ==
          0);
  const std::string csv = slurp("cli_da/dalang/dalang.csv");
  CHECK(first_line(csv) == "status,value,note");
  const std::string row = csv.substr(csv.find('\n') + 1);
  CHECK(row.rfind("finite,", 0) == 0);
  CHECK(std::fabs(field(row, 1) - std::sqrt(M_PI)) <= 1e-6);
  REQUIRE(run("dalang --out cli_da --experiment inf "
              "--kernel family=bessel,s=1,dim=3") == 0);
  const std::string inf = slurp("cli_da/inf/dalang.csv");
  CHECK(inf.substr(inf.find('\n') + 1).rfind("infinite,", 0) == 0);
}

TEST_CASE("the maximizer writes the summary and the profile") {
  REQUIRE(run("variational --out cli_var "
              "--kernel family=atoms,dim=1,w=0.7,xi=1.3 --n 16 "
              "--length 6.4") == 0);
  CHECK(exists("cli_var/variational/variational.csv"));
  const std::string prof = slurp("cli_var/variational/profile.csv");
  CHECK(first_line(prof) == "index,x,g");
  CHECK(count_lines(prof) == 17);
}

TEST_CASE("a malformed kernel spec is a config error") {
  CHECK(run("dalang --out cli_badk --kernel family=nope,dim=1 2> /dev/null") ==
        2);
  CHECK(run("dalang --out cli_badk --kernel garbage 2> /dev/null") == 2);
}

TEST_CASE("the two-estimator comparison prints one json line") {
  REQUIRE(run("pam-crosscheck --out cli_cc --N 1 --t 0.1 --eps 0.25 "
              "--fields 100 --paths 30 --replica-samples 500 --seed 3 "
              "> cli_cc_stdout.txt") == 0);
  const std::string out = first_line(slurp("cli_cc_stdout.txt"));
  REQUIRE(!out.empty());
  const auto j = nlohmann::json::parse(out);
  CHECK(j.contains("logA"));
  CHECK(j.contains("stderrA"));
  CHECK(j.contains("logB"));
  CHECK(j.contains("stderrB"));
  CHECK(j.contains("gap_sigmas"));
  CHECK(j.contains("pass"));
  const auto file = nlohmann::json::parse(
      slurp("cli_cc/pam-crosscheck/crosscheck.json"));
  CHECK(file.at("logA") == j.at("logA"));
  CHECK(file.contains("nesting_bias"));
  CHECK(file.at("seed").get<std::uint64_t>() == 3);
}

TEST_CASE("random spectral identity sweeps pass end to end") {
  REQUIRE(run("bochner-test --out cli_bo --count 3 --steps 16 --seed 5") == 0);
  const std::string csv = slurp("cli_bo/bochner-test/bochner.csv");
  REQUIRE(count_lines(csv) == 4);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    CHECK(line.substr(line.size() - 2) == ",1");
  }
}

TEST_CASE("the time splitting comparison runs from the command line") {
  REQUIRE(run("submult-test --out cli_sm "
              "--kernel family=truncpower,l=2,M=1,dim=1 --m 1 --t1 0.4 "
              "--t2 0.6 --samples 300 --steps-per-unit 16 --seed 21") == 0);
  const std::string csv = slurp("cli_sm/submult-test/submult.csv");
  CHECK(count_lines(csv) == 2);
  CHECK(first_line(csv).rfind("mode,", 0) == 0);
}

TEST_CASE("the growth rate table covers every requested replica count") {
  REQUIRE(run("theorem-table --out cli_tt --kernel family=logplus,T=1,dim=2 "
              "--N 6,7 --t 1 --steps 12 --samples 150 --seed 9") == 0);
  const std::string csv = slurp("cli_tt/theorem-table/theorem.csv");
  CHECK(count_lines(csv) == 3);
  CHECK(first_line(csv).rfind("N,lambda,", 0) == 0);
}

TEST_CASE("usage errors and the version flag") {
  CHECK(run("--version > /dev/null") == 0);
  CHECK(run("> /dev/null 2>&1") == 2);
  CHECK(run("no-such-command > /dev/null 2>&1") == 2);
  CHECK(run("rates --no-such-flag > /dev/null 2>&1") == 2);
}
