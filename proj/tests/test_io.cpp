#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <regex>

#include "doctest.h"
#include "hchc/errors.hpp"
#include "hchc/io.hpp"
#include "hchc/svg.hpp"
#include "oracles.hpp"

using namespace hchc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("hchc_test_io_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path file(const std::string& name, std::string_view text) const {
        write_text_file(path / name, text);
        return path / name;
    }
};

std::vector<Point2> svg_anchor_centers(const std::string& svg) {
    std::vector<Point2> out;
    const std::regex re("<circle class=\"anchor\" cx=\"([-0-9.]+)\" cy=\"([-0-9.]+)\"");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
        out.push_back({std::stod((*it)[1]), std::stod((*it)[2])});
    }
    return out;
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("load_csv") {
    TempDir dir("csv");
    SUBCASE("plain numeric table") {
        const Dataset d = load_csv(dir.file("a.csv", "1,2\n3,4.5\n-1e-3,0\n"));
        CHECK(d.size() == 3);
        CHECK(d.dim() == 2);
        CHECK(d.features(1, 1) == 4.5);
        CHECK(d.features(2, 0) == -1e-3);
        CHECK_FALSE(d.labels.has_value());
    }
    SUBCASE("header and named label column map to dense ids in first-appearance order") {
        const Dataset d = load_csv(dir.file("b.csv", "f1,class,f2\n1,cat,2\n3,dog,4\n5,cat,6\n7,eel,8\n"),
                                   CsvOptions{.has_header = true, .label_column = "class"});
        CHECK(d.dim() == 2);
        CHECK(d.features(1, 1) == 4.0);
        CHECK(*d.labels == Labels{0, 1, 0, 2});
    }
    SUBCASE("label column by index") {
        const Dataset d = load_csv(dir.file("c.csv", "1,7\n2,3\n"), CsvOptions{.label_column = "1"});
        CHECK(d.dim() == 1);
        CHECK(*d.labels == Labels{0, 1});
    }
    SUBCASE("errors name the row and column") {
        const auto bad = dir.file("d.csv", "1,2\n3,x\n");
        CHECK_THROWS_WITH_AS(load_csv(bad), doctest::Contains("row 2, column 2"), ParseError);
        CHECK_THROWS_WITH_AS(load_csv(dir.file("e.csv", "1,2\n3\n")), doctest::Contains("row 2"), ParseError);
        CHECK_THROWS_AS(load_csv(dir.file("f.csv", "")), ParseError);
        CHECK_THROWS_AS(load_csv(dir.file("g.csv", "a,b\n1,2\n"), CsvOptions{.has_header = true, .label_column = "z"}),
                        ParseError);
        CHECK_THROWS_AS(load_csv(dir.path / "missing.csv"), IoError);
    }
}

TEST_CASE("load_labels") {
    TempDir dir("labels");
    CHECK(load_labels(dir.file("a.csv", "label\n2\n0\n1\n")) == Labels{2, 0, 1});
    CHECK(load_labels(dir.file("b.csv", "1\n1\n0\n")) == Labels{1, 1, 0});
    CHECK(load_labels(dir.file("c.csv", "id,x,y,assigned_cluster,outlier\n0,0,0,3,0\n1,0,0,1,1\n")) == Labels{3, 1});
    CHECK_THROWS_AS(load_labels(dir.file("d.csv", "label\n1\nx\n")), ParseError);
}

TEST_CASE("config parsing") {
    SUBCASE("empty text gives the defaults") {
        const RunConfig c = parse_config_text("");
        CHECK(c.training.batch_size == 128);
        CHECK(c.training.learning_rate == 0.002);
        CHECK(c.training.beta1 == 5.0);
        CHECK(c.training.beta2 == 10.0);
        CHECK(c.training.discount_gamma == 0.8);
        CHECK(c.training.sigma2 == 0.1);
        CHECK(c.training.xi == 0.05);
        CHECK(c.training.k_neighbors == 5);
        CHECK(c.training.pretrain_epochs == 50);
        CHECK(c.training.train_epochs == 200);
        CHECK(c.layout.gamma_exponent == 1.0);
        CHECK(c.layout.radius == 1.0);
        CHECK(c.layout.exact_cycle_max == 16);
        CHECK(c.layout.outlier_threshold == 0.5);
    }
    SUBCASE("values, comments and lists") {
        const RunConfig c = parse_config_text(
            "# comment\nk_neighbors = 30\n  seed=42  \nhidden_dims = 16, 8\ndiscount_granularity = minibatch\n"
            "radius = 2.5 # trailing\n");
        CHECK(c.training.k_neighbors == 30);
        CHECK(c.training.seed == 42);
        CHECK(c.training.hidden_dims == std::vector<std::size_t>{16, 8});
        CHECK(c.training.discount_granularity == DiscountGranularity::Minibatch);
        CHECK(c.layout.radius == 2.5);
    }
    SUBCASE("errors name the key") {
        const auto key_of = [](std::string_view text) {
            try {
                parse_config_text(text);
            } catch (const ConfigError& e) {
                return e.key();
            }
            return std::string("<none>");
        };
        CHECK(key_of("discount_gamma = 1.5") == "discount_gamma");
        CHECK(key_of("sigma2 = 0") == "sigma2");
        CHECK(key_of("k_neighbors = 200") == "k_neighbors");
        CHECK(key_of("batch_size = many") == "batch_size");
        CHECK(key_of("wobble = 1") == "wobble");
        CHECK(key_of("seed = 1\nseed = 2") == "seed");
        CHECK(key_of("outlier_threshold = 1") == "outlier_threshold");
        CHECK(key_of("exact_cycle_max = 40") == "exact_cycle_max");
    }
    SUBCASE("config echo round-trips") {
        RunConfig c = parse_config_text("seed = 9\nxi = 0.2\nclusters = 4\ngamma_exponent = 3\n");
        const std::string echo = config_echo_json(c);
        CHECK(parse_config_json(echo) == c);
        CHECK(echo.find("\"discount_gamma\"") != std::string::npos);
    }
    SUBCASE("files") {
        TempDir dir("config");
        CHECK(parse_config(dir.file("a.cfg", "beta2 = 3\n")).training.beta2 == 3.0);
        const RunConfig c = parse_config_text("beta1 = 2\n");
        CHECK(parse_config(dir.file("echo.json", config_echo_json(c))) == c);
    }
}

TEST_CASE("number formatting") {
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(12345678) == "12345678");
}

TEST_CASE("probability CSV round trip") {
    TempDir dir("prob");
    std::mt19937_64 rng(6);
    const ProbabilityMatrix p = ProbabilityMatrix::from_network_output(oracle::random_stochastic(40, 5, rng));
    write_probabilities_csv(dir.path / "p.csv", p);
    const ProbabilityMatrix back = load_probabilities(dir.path / "p.csv");
    REQUIRE(back.samples() == 40);
    REQUIRE(back.clusters() == 5);
    for (std::size_t i = 0; i < p.values().size(); ++i) {
        CHECK(std::abs(back.values().values()[i] - p.values().values()[i]) < 1e-9);
    }
    // as_written is a fixed point of write then load
    const ProbabilityMatrix fixed = as_written(p);
    write_probabilities_csv(dir.path / "fixed.csv", fixed);
    CHECK(load_probabilities(dir.path / "fixed.csv") == fixed);
    CHECK(as_written(fixed) == fixed);
    CHECK(read_text_file(dir.path / "p.csv").rfind("p0,p1,p2,p3,p4\n", 0) == 0);

    CHECK_THROWS_WITH_AS(load_probabilities(dir.file("bad.csv", "0.5,0.5\n0.7,0.7\n")),
                         doctest::Contains("row index 1"), ParseError);
    const ProbabilityMatrix near = load_probabilities(dir.file("near.csv", "0.5,0.5000001\n"));
    CHECK(near(0, 0) + near(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("write_outputs and load_layout") {
    TempDir dir("outputs");
    RunArtifacts a;
    a.probabilities = ProbabilityMatrix(DenseMatrix{{1, 0}, {0, 1}, {1, 0}});
    a.layout = map_to_circle(a.probabilities, LayoutParams{});
    a.assigned = assign_labels(a.probabilities);
    a.metrics = Metrics{1.0, 1.0};
    write_outputs(a, dir.path / "out");

    for (const char* f : {"probabilities.csv", "layout.csv", "cycle.json", "metrics.json", "config_echo.json"}) {
        CHECK(fs::exists(dir.path / "out" / f));
    }
    const LoadedLayout back = load_layout(dir.path / "out" / "layout.csv", dir.path / "out" / "cycle.json");
    CHECK(back.assigned == a.assigned);
    CHECK(back.layout.anchor_angles == a.layout.anchor_angles);
    CHECK(back.layout.anchor_angles[0] == 0.0);
    CHECK(back.layout.cycle.order == a.layout.cycle.order);
    // one-hot rows sit exactly on their anchors
    for (std::size_t i = 0; i < 3; ++i) {
        const Point2 anchor = back.layout.anchor_of(static_cast<std::size_t>(a.assigned[i]));
        CHECK(back.layout.sample_coords[i].x == doctest::Approx(anchor.x).epsilon(1e-12));
        CHECK(back.layout.sample_coords[i].y == doctest::Approx(anchor.y).epsilon(1e-12));
    }
    CHECK(read_text_file(dir.path / "out" / "metrics.json").find("\"acc\"") != std::string::npos);

    RunArtifacts no_metrics = a;
    no_metrics.metrics.reset();
    write_outputs(no_metrics, dir.path / "plain");
    CHECK_FALSE(fs::exists(dir.path / "plain" / "metrics.json"));

    RunArtifacts broken = a;
    broken.assigned.pop_back();
    CHECK_THROWS_AS(write_outputs(broken, dir.path / "broken"), InputError);
}

TEST_CASE("SVG rendering") {
    const double pi = std::numbers::pi;
    CircularLayout l;
    l.radius = 1.0;
    l.cycle.order = {0, 1, 2};
    l.anchor_angles = {0.0, 2 * pi / 3, 4 * pi / 3};
    l.anchor_coords = anchor_positions(l.anchor_angles, 1.0);

    SUBCASE("anchors at 0, 2pi/3, 4pi/3 in canvas coordinates, zero samples") {
        const std::string svg = svg_document(l, {}, SvgStyle{.width_px = 900});
        CHECK(svg.find("<svg xmlns") != std::string::npos);
        CHECK(svg.find("</svg>") != std::string::npos);
        CHECK(count(svg, "class=\"outline\"") == 1);
        CHECK(count(svg, "class=\"sample\"") == 0);
        const auto centers = svg_anchor_centers(svg);
        REQUIRE(centers.size() == 3);
        const double c = 450.0, s = 450.0 * 0.9;
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(centers[i].x == doctest::Approx(c + s * std::cos(l.anchor_angles[i])).epsilon(1e-3));
            CHECK(centers[i].y == doctest::Approx(c - s * std::sin(l.anchor_angles[i])).epsilon(1e-3));
        }
        CHECK(centers[0].x == doctest::Approx(855.0));
        CHECK(centers[1].y == doctest::Approx(450.0 - 405.0 * std::sqrt(3.0) / 2.0).epsilon(1e-4));
    }
    SUBCASE("samples and outliers, deterministic bytes") {
        l.sample_coords = {{0.5, 0.0}, {0.0, 0.0}};
        l.outlier_flags = {false, true};
        const std::string a = svg_document(l, {0, 2});
        CHECK(count(a, "class=\"sample\"") == 1);
        CHECK(count(a, "class=\"outlier\"") == 1);
        CHECK(a == svg_document(l, {0, 2}));
        TempDir dir("svg");
        render_svg(l, {0, 2}, dir.path / "x.svg");
        render_svg(l, {0, 2}, dir.path / "y.svg");
        CHECK(read_text_file(dir.path / "x.svg") == read_text_file(dir.path / "y.svg"));
    }
}
