#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
    static const fs::path root = [] {
        auto p = fs::temp_directory_path() / ("uavguard_cli_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

// Exit status of the tool; stderr goes to err.txt in the scratch dir.
int cli(const std::string& args) {
    const std::string cmd = std::string("\"") + UAVGUARD_CLI + "\" " + args + " > /dev/null 2> \"" +
                            path("err.txt") + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const std::string& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

} // namespace

TEST_CASE("exit codes and diagnostics") {
    CHECK(cli("--help") == 0);
    CHECK(cli("") == 3);
    CHECK(cli("frobnicate") == 3);
    CHECK(cli("generate --no-such-flag 1") == 3);

    CHECK(cli("ingest --data " + path("missing.csv") + " --out " + path("x")) == 2);
    const auto err = slurp(path("err.txt"));
    CHECK(err.rfind("uavguard: error: ", 0) == 0);
    CHECK(std::count(err.begin(), err.end(), '\n') == 1);

    spit(path("bad.cfg"), "seed = 1\nbogus = 2\n");
    CHECK(cli("generate --config " + path("bad.cfg") + " --out " + path("x")) == 3);
    CHECK(slurp(path("err.txt")).find("line 2") != std::string::npos);
    CHECK(cli("experiment nth --n 1 --out " + path("x")) == 3);

    spit(path("broken.csv"), "timestamp,gyro_rad_0\n1,2\n");
    CHECK(cli("ingest --data " + path("broken.csv") + " --out " + path("x")) == 4);
}

TEST_CASE("generate, ingest and manifest rerun") {
    REQUIRE(cli("generate --synthetic-records 500 --seed 4 --out " + path("g1")) == 0);
    REQUIRE(cli("generate --synthetic-records 500 --seed 4 --out " + path("g2")) == 0);
    CHECK(slurp(path("g1/mission.csv")) == slurp(path("g2/mission.csv")));
    CHECK(slurp(path("g1/manifest.json")) == slurp(path("g2/manifest.json")));
    CHECK(slurp(path("g1/manifest.json")).find("\"synthetic_records\": \"500\"") != std::string::npos);

    REQUIRE(cli("generate --config " + path("g1/manifest.json") + " --out " + path("g3")) == 0);
    CHECK(slurp(path("g1/mission.csv")) == slurp(path("g3/mission.csv")));

    REQUIRE(cli("ingest --data " + path("g1/mission.csv") + " --out " + path("i")) == 0);
    CHECK(fs::exists(path("i/clean.csv")));
    CHECK(fs::exists(path("i/norm.csv")));
    CHECK(slurp(path("i/summary.json")).find("\"records\": 500") != std::string::npos);
}

TEST_CASE("packetset score identity") {
    spit(path("truth.csv"), "sport,dport,flags,seq,ack,length\n1,2,SA,3,4,5\n80,443,A,10,20,0\n");
    REQUIRE(cli("packetset score --pred " + path("truth.csv") + " --truth " + path("truth.csv") + " --out " +
                path("sc")) == 0);
    CHECK(slurp(path("sc/score.txt")) ==
          "packets=2\nsport=100.00\ndport=100.00\nflags=100.00\nseq=100.00\nack=100.00\nlength=100.00\n"
          "errors_0=100.00\nerrors_1=0.00\nerrors_2=0.00\nerrors_3=0.00\nerrors_4plus=0.00\n");
    CHECK(cli("packetset score --truth " + path("truth.csv") + " --out " + path("sc")) == 3);
}

TEST_CASE("batch sweep is strictly decreasing") {
    REQUIRE(cli("experiment batch-sweep --synthetic-records 4000 --out " + path("b")) == 0);
    std::istringstream csv(slurp(path("b/batch.csv")));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "batch_size,elapsed_s,accuracy,precision,recall,f_score");
    double prev = 1e300;
    std::string metrics;
    int rows = 0;
    while (std::getline(csv, line)) {
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        const double elapsed = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        CHECK(elapsed < prev);
        prev = elapsed;
        if (rows++ == 0) metrics = line.substr(c2);
        CHECK(line.substr(c2) == metrics);
    }
    CHECK(rows == 6);
}

TEST_CASE("cleanup") { fs::remove_all(scratch()); }
