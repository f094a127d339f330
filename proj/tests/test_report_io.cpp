#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "anytime/report_io.hpp"

using namespace anytime::report;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("format_number round trips") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(3.0) == "3");
    CHECK(format_number(-2.5e-300) == "-2.5e-300");
    CHECK(format_number(NAN) == "nan");
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(-INFINITY) == "-inf");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> e(-300.0, 300.0);
    for (int i = 0; i < 10000; ++i) {
        const double v = (i % 2 ? -1.0 : 1.0) * std::pow(10.0, e(rng));
        CHECK(std::stod(format_number(v)) == v);
    }
}

TEST_CASE("csv quoting round trip") {
    Table t{{"name", "value", "note"},
            {{"plain", "1", ""}, {"with,comma", "2", "say \"hi\""}, {"multi\nline", "3", "crlf\r\nhere"}}};
    const auto text = to_csv(t);
    CHECK(text.rfind("name,value,note\nplain,1,\n\"with,comma\",2,\"say \"\"hi\"\"\"\n", 0) == 0);
    CHECK(parse_csv(text) == t);
    CHECK(parse_csv("a,b\r\n1,2\r\n") == Table{{"a", "b"}, {{"1", "2"}}});
    CHECK(parse_csv("a,b\n1,2") == Table{{"a", "b"}, {{"1", "2"}}});
}

TEST_CASE("csv errors") {
    CHECK_THROWS_AS(to_csv(Table{{"a", "b"}, {{"1"}}}), std::invalid_argument);
    CHECK_THROWS_WITH(parse_csv("a,b\n1,2,3\n"), doctest::Contains("3 fields"));
    CHECK_THROWS_AS(parse_csv("a,\"b\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_csv(""), std::runtime_error);
}

TEST_CASE("report emission") {
    const fs::path dir = fs::temp_directory_path() / "anytime_report_test";
    fs::create_directories(dir);
    nlohmann::ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["values"] = {0.1, 2.0};
    const Table t{{"k", "v"}, {{"x", format_number(0.1)}}};

    emit_report(doc, t, ReportFormat::Json, dir / "a.json");
    emit_report(doc, t, ReportFormat::Json, dir / "b.json");
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(nlohmann::ordered_json::parse(slurp(dir / "a.json")) == doc);

    emit_report(doc, t, ReportFormat::Csv, dir / "a.csv");
    CHECK(read_csv(dir / "a.csv") == t);

    const fs::path bad = dir / "missing_dir" / "x.json";
    const std::string bad_name = bad.string();
    CHECK_THROWS_WITH_AS(emit_report(doc, t, ReportFormat::Json, bad), doctest::Contains(bad_name.c_str()),
                         std::runtime_error);
    CHECK_THROWS_AS(read_csv(dir / "nope.csv"), std::runtime_error);
    fs::remove_all(dir);

    CHECK(parse_report_format("csv") == ReportFormat::Csv);
    CHECK_THROWS_AS(parse_report_format("xml"), std::invalid_argument);
}
