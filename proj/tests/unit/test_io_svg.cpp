#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "wideformer/svg.hpp"

using namespace wf;

TEST_CASE("csv round trip and errors") {
  const CsvTable t = parse_csv("a,b\n1,2.5\n3,4\n");
  CHECK(t.header.size() == 2);
  CHECK(t.rows.size() == 2);
  CHECK(t.column("b") == 1);
  CHECK(t.column("z") == -1);
  CHECK(t.number(0, "b") == 2.5);
  CHECK_THROWS(parse_csv(""));
  CHECK_THROWS(parse_csv("a,b\n1\n"));
  CHECK_THROWS(t.number(0, "z"));
}

TEST_CASE("atomic write and read") {
  const auto dir = std::filesystem::temp_directory_path() / "wf_io_test";
  ensure_directory((dir / "sub").string());
  const std::string path = (dir / "sub" / "f.txt").string();
  write_atomic(path, "hello\n");
  write_atomic(path, "again\n");
  CHECK(read_file(path) == "again\n");
  CHECK_THROWS(read_file((dir / "missing").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3, 1e-300, 12345.678})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("log-log slope") {
  const std::vector<double> x{128, 256, 512};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
  CHECK(loglog_slope(x, y) == doctest::Approx(-0.5));
}

TEST_CASE("svg rendering") {
  Plot p;
  p.title = "t";
  p.log_x = p.log_y = true;
  p.series.push_back({"s1", {1, 10, 100}, {1, 0.1, 0.01}});
  const std::string svg = render_svg(p);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("class=\"series\"") != std::string::npos);
  CHECK(svg.find("s1") != std::string::npos);

  const CsvTable k = parse_csv("block,label,pair1,pair2,G,F\n0,stem,0,0,1.0,1\n1,b1,0,0,1.5,1\n0,stem,0,1,0.2,0.2\n");
  const Plot kp = kernel_depth_plot(k);
  CHECK(kp.series.size() == 1);
  CHECK(kp.series[0].y == std::vector<double>{1.0, 1.5});
  CHECK_THROWS(kernel_depth_plot(parse_csv("x,y\n1,2\n")));
}
