#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "imp/io.hpp"
#include "imp/projection.hpp"
#include "imp/rng.hpp"
#include "imp/semantic.hpp"
#include "imp/synthetic.hpp"
#include "json.hpp"
#include "support/oracles.hpp"

#ifndef IMP_CLI_PATH
#error "IMP_CLI_PATH must point at the imp binary"
#endif

using namespace imp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

class Sandbox {
 public:
  explicit Sandbox(const std::string& name)
      : root_(fs::temp_directory_path() / ("imp_cli_" + name)) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Sandbox() { fs::remove_all(root_); }

  fs::path operator/(const std::string& rel) const { return root_ / rel; }

  Run run(const std::string& args) const {
    const auto out = root_ / "stdout.txt";
    const auto err = root_ / "stderr.txt";
    const std::string cmd = "cd '" + root_.string() + "' && '" IMP_CLI_PATH "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
  }

  void write(const std::string& rel, const std::string& text) const {
    fs::create_directories((root_ / rel).parent_path());
    write_text_file(root_ / rel, text);
  }

 private:
  fs::path root_;
};

DatasetConfig two_classes() {
  DatasetConfig c;
  c.class_names = {"a", "b"};
  return c;
}

LabelMap rows_to_map(std::initializer_list<std::initializer_list<int>> rows, LabelSpace space) {
  LabelMap lm(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()), space, 0);
  int y = 0;
  for (const auto& r : rows) {
    int x = 0;
    for (int v : r) lm.at(y, x++) = static_cast<std::uint16_t>(v);
    ++y;
  }
  return lm;
}

}  // namespace

TEST_CASE("project: declared images without detections become background") {
  Sandbox box("project_empty");
  box.write("cfg.json", dataset_config_to_json(two_classes()));
  box.write("dets.json", R"({"images":[{"image_id":"x","height":9,"width":7}],"detections":[]})");
  const auto r = box.run("project dets.json --config cfg.json --out-dir out");
  REQUIRE(r.code == 0);
  const auto lm = load_labelmap(box / "out/x.png", two_classes().label_space());
  CHECK(lm.rows == 9);
  CHECK(lm.cols == 7);
  for (auto v : lm.labels) CHECK(v == 2);

  box.write("bare.json", "[]");
  CHECK(box.run("project bare.json --config cfg.json --out-dir out2").code == 0);
}

TEST_CASE("project: malformed JSON is an input error with a byte offset") {
  Sandbox box("project_bad");
  box.write("cfg.json", dataset_config_to_json(two_classes()));
  box.write("dets.json", R"([{"image_id": "a", "score": ])");
  const auto r = box.run("project dets.json --config cfg.json --out-dir out");
  CHECK(r.code == 2);
  const auto err = json::parse(r.err);
  CHECK(err["error"] == "ParseError");
  CHECK(err["message"].get<std::string>().find("byte offset") != std::string::npos);

  box.write("dets2.json", R"([{"image_id":"a","class":"a","score":2,"bbox":[0,0,1,1],
                               "mask":{"h":1,"w":1,"data":[1]}}])");
  const auto v = box.run("project dets2.json --config cfg.json --height 4 --width 4 --out-dir o");
  CHECK(v.code == 2);
  const auto verr = json::parse(v.err);
  CHECK(verr["error"] == "ValidationError");
  CHECK(verr["cause"] == "InvalidScore");
}

TEST_CASE("project: synthetic fixture matches the rasterizer and canvas dumps are exact") {
  Sandbox box("project_fixture");
  const DatasetConfig config = two_classes();
  box.write("cfg.json", dataset_config_to_json(config));
  Rng rng(42);
  std::vector<ImageDetections> images;
  for (int i = 0; i < 3; ++i) {
    ImageDetections im{"im" + std::to_string(i), 40 + 4 * i, 52, {}};
    // Disjoint boxes in the left and right halves.
    for (int k = 0; k < 2; ++k) {
      Detection d;
      d.class_id = k;
      d.score = static_cast<float>(rng.uniform(0.55, 1.0));
      const float x0 = k == 0 ? 2.f : 28.f;
      d.bbox = BBox{x0, 3.f, x0 + 20.f, 30.f};
      d.mask = InstanceMask(5, 4);
      for (auto& m : d.mask.values) m = static_cast<float>(rng.uniform());
      d.index = k;
      im.detections.push_back(d);
    }
    images.push_back(im);
  }
  box.write("dets.json", detections_to_json(images, config));
  REQUIRE(box.run("project dets.json --config cfg.json --out-dir out --emit-canvas --jobs 3")
              .code == 0);
  REQUIRE(box.run("project dets.json --config cfg.json --out-dir seq --jobs 1").code == 0);
  for (const auto& im : images) {
    const CanvasSpec spec{2, im.height, im.width, 4};
    const auto lm = load_labelmap(box / ("out/" + im.image_id + ".png"), config.label_space());
    CHECK(lm == oracle::rasterize(im.detections, spec, 0.5f));
    CHECK(read_text_file(box / ("out/" + im.image_id + ".png")) ==
          read_text_file(box / ("seq/" + im.image_id + ".png")));
    const auto dump = read_canvas_dump(box / ("out/" + im.image_id + ".canvas"));
    CHECK(dump == imp_forward(im.detections, spec).canvas.values);
  }
}

TEST_CASE("eval: identity, hand fixture, missing pair, determinism") {
  Sandbox box("eval");
  const DatasetConfig config = two_classes();
  box.write("cfg.json", dataset_config_to_json(config));
  const auto space = config.label_space();
  fs::create_directories(box / "gt");
  fs::create_directories(box / "pred");
  save_labelmap(rows_to_map({{0, 0}, {1, 1}}, space), box / "gt/a.png");
  save_labelmap(rows_to_map({{0, 1}, {1, 1}}, space), box / "pred/a.png");

  const auto same = box.run("eval gt gt --config cfg.json --out-dir same");
  REQUIRE(same.code == 0);
  const auto rs = json::parse(read_text_file(box / "same/report.json"));
  CHECK(rs["miou"].get<double>() == 1.0);
  CHECK(rs["macc"].get<double>() == 1.0);

  const auto hand = box.run("eval pred gt --config cfg.json --out-dir hand");
  REQUIRE(hand.code == 0);
  const auto rh = json::parse(read_text_file(box / "hand/report.json"));
  CHECK(std::abs(rh["miou"].get<double>() - 7.0 / 12.0) < 1e-15);
  CHECK(std::abs(rh["macc"].get<double>() - 0.75) < 1e-15);
  CHECK(rh["pixels"] == 4);
  CHECK(rh["config"]["classes"] == json::array({"a", "b"}));
  CHECK(fs::exists(box / "hand/per_class.csv"));

  REQUIRE(box.run("eval pred gt --config cfg.json --out-dir again").code == 0);
  CHECK(read_text_file(box / "hand/report.json") == read_text_file(box / "again/report.json"));

  const auto bnd = box.run("eval pred gt --config cfg.json --out-dir bnd --boundary-thresholds");
  REQUIRE(bnd.code == 0);
  const std::string csv = read_text_file(box / "bnd/boundary.csv");
  CHECK(csv.rfind("d,miou,pixels\n10.0,", 0) == 0);
  CHECK(csv.find("\n400.0,") != std::string::npos);

  save_labelmap(rows_to_map({{0, 0}, {1, 1}}, space), box / "gt/b.png");
  const auto missing = box.run("eval pred gt --config cfg.json --out-dir miss");
  CHECK(missing.code == 2);
  const auto err = json::parse(missing.err);
  CHECK(err["error"] == "MissingPair");
  CHECK(err["message"].get<std::string>().find("b.png") != std::string::npos);

  save_labelmap(rows_to_map({{0, 0, 0}, {1, 1, 1}}, space), box / "pred/b.png");
  const auto shape = box.run("eval pred gt --config cfg.json --out-dir shape");
  CHECK(shape.code == 2);
  CHECK(json::parse(shape.err)["error"] == "ShapeMismatch");
}

TEST_CASE("convert-gt: square, background and round trip") {
  Sandbox box("convert");
  DatasetConfig config;
  config.class_names = {"a", "b", "c"};
  box.write("cfg.json", dataset_config_to_json(config));
  const auto space = config.label_space();
  fs::create_directories(box / "gt");
  LabelMap square(24, 24, space, space.background());
  for (int y = 4; y < 12; ++y)
    for (int x = 6; x < 14; ++x) square.at(y, x) = 1;
  save_labelmap(square, box / "gt/sq.png");
  save_labelmap(LabelMap(10, 10, space, space.background()), box / "gt/bg.png");

  const auto r = box.run("convert-gt gt --config cfg.json --out dets.json");
  REQUIRE(r.code == 0);
  const auto j = json::parse(read_text_file(box / "dets.json"));
  REQUIRE(j["detections"].size() == 1);
  CHECK(j["detections"][0]["score"] == 1.0);
  CHECK(j["detections"][0]["class"] == "b");
  CHECK(j["detections"][0]["image_id"] == "sq");
  CHECK(j["images"].size() == 2);

  Sandbox shapes("convert_shapes");
  shapes.write("cfg.json", dataset_config_to_json(config));
  fs::create_directories(shapes / "gt");
  Rng rng(9);
  for (int i = 0; i < 3; ++i)
    save_labelmap(synthetic_shape_scene(rng, 320, 400, space),
                  shapes / ("gt/s" + std::to_string(i) + ".png"));
  REQUIRE(shapes.run("convert-gt gt --config cfg.json --out dets.json").code == 0);
  REQUIRE(shapes.run("project dets.json --config cfg.json --out-dir pred").code == 0);
  REQUIRE(shapes.run("eval pred gt --config cfg.json --out-dir rep").code == 0);
  const auto rep = json::parse(read_text_file(shapes / "rep/report.json"));
  CHECK(rep["miou"].get<double>() >= 0.85);
}

TEST_CASE("gradcheck and bench exit codes") {
  Sandbox box("gradcheck");
  const auto ok = box.run("gradcheck --report g.json");
  CHECK(ok.code == 0);
  const auto report = json::parse(read_text_file(box / "g.json"));
  CHECK(report["passed"] == true);
  CHECK(report["config"]["seed"] == 1);

  CHECK(box.run("gradcheck --report g2.json").code == 0);
  CHECK(read_text_file(box / "g.json") == read_text_file(box / "g2.json"));

  const auto zero = box.run("gradcheck --step 0");
  CHECK(zero.code == 2);
  CHECK(json::parse(zero.err)["error"] == "InvalidArgument");

  const auto strict = box.run("gradcheck --tol 0 --report strict.json");
  CHECK(strict.code == 1);
  CHECK(json::parse(strict.err)["report"] == "strict.json");

  CHECK(box.run("gradcheck --canvas 4by4").code == 2);
  CHECK(box.run("frobnicate").code == 2);

  const auto bench = box.run("bench --canvas 32x32 --detections 10 --repeats 3 --isa scalar");
  REQUIRE(bench.code == 0);
  const auto b = json::parse(bench.out);
  CHECK(b["isa"] == "scalar");
  CHECK(b["forward_ms"]["median"].get<double>() >= 0.0);
}
