#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "dlsn/config.hpp"
#include "dlsn/ingest.hpp"
#include "dlsn/io.hpp"
#include "dlsn/report.hpp"

using namespace dlsn;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("dlsn_test_io_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

WindowSpec abc_2010() {
  WindowSpec w;
  w.start = parse_date("2010-01-01");
  w.end = parse_date("2010-09-30");
  w.bin = BinWidth::quarter;
  w.nodes = {"A", "B", "C"};
  return w;
}

const char* kEvents =
    "source,target,date\n"
    "A,B,2010-01-15\n"
    "A,B,2010-02-20\n"
    "B,A,2010-03-31\n"
    "A,C,2010-04-01\n"
    "C,B,2010-06-30T12:00:00\n"
    "B,C,2010-07-01\n"
    "A,A,2010-08-01\n"
    "D,A,2010-08-02\n"
    "C,A,2010-10-01\n"
    "C,A,2010-09-30\n";

}  // namespace

TEST(Dates, ParseAndBins) {
  const auto d = parse_date("2004-03-31");
  EXPECT_EQ(static_cast<int>(d.year()), 2004);
  EXPECT_EQ(period_label(period_of(d, BinWidth::quarter), BinWidth::quarter), "2004Q1");
  EXPECT_EQ(period_label(period_of(parse_date("2004-10-01"), BinWidth::quarter), BinWidth::quarter), "2004Q4");
  EXPECT_EQ(period_label(period_of(d, BinWidth::month), BinWidth::month), "2004-03");
  EXPECT_EQ(period_label(period_of(d, BinWidth::year), BinWidth::year), "2004");
  EXPECT_THROW(parse_date("2010-02-30"), DataError);
  EXPECT_THROW(parse_date("2010/01/01"), DataError);
  EXPECT_THROW(parse_date("10-01-01"), DataError);
  EXPECT_THROW(parse_bin_width("week"), ConfigError);

  WindowSpec w = abc_2010();
  w.start = parse_date("2004-01-01");
  w.end = parse_date("2013-12-31");
  EXPECT_EQ(w.bins(), 40u);
  EXPECT_EQ(w.bin_labels().back(), "2013Q4");
}

TEST(IngestEvents, TenEventFixture) {
  TempDir tmp("events");
  const auto r = ingest_events(write_file(tmp.path / "events.csv", kEvents).string(), abc_2010());
  ASSERT_EQ(r.data.times(), 3u);
  EXPECT_EQ(r.bin_labels, (std::vector<std::string>{"2010Q1", "2010Q2", "2010Q3"}));
  // A=0, B=1, C=2; ones by quarter
  const std::vector<std::vector<std::pair<int, int>>> ones{{{0, 1}, {1, 0}}, {{0, 2}, {2, 1}}, {{1, 2}, {2, 0}}};
  for_each_dyad(3, 3, [&](std::size_t i, std::size_t j, std::size_t t) {
    bool one = false;
    for (auto [a, b] : ones[t]) one = one || (static_cast<std::size_t>(a) == i && static_cast<std::size_t>(b) == j);
    ASSERT_TRUE(r.data.observed(i, j, t));
    EXPECT_EQ(*r.data.value(i, j, t), one ? 1 : 0) << i << "," << j << "," << t;
  });
  EXPECT_EQ(r.data.observed_count(), 18u);
  EXPECT_EQ(r.report.rows, 10u);
  EXPECT_EQ(r.report.kept, 7u);
  EXPECT_EQ(r.report.self_loops, 1u);
  EXPECT_EQ(r.report.outside_whitelist, 1u);
  EXPECT_EQ(r.report.outside_window, 1u);
}

TEST(IngestEvents, ColumnOrderAndQuotesDoNotMatter) {
  TempDir tmp("events_order");
  const auto p = write_file(tmp.path / "e.csv", "date,\"target\",source,extra\r\n2010-01-02,B,A,\"x,y\"\r\n");
  const auto r = ingest_events(p.string(), abc_2010());
  EXPECT_EQ(*r.data.value(0, 1, 0), 1);
  EXPECT_EQ(r.report.kept, 1u);
}

TEST(IngestEvents, ErrorsNameTheLine) {
  TempDir tmp("events_bad");
  const auto p = write_file(tmp.path / "e.csv", "source,target,date\nA,B,2010-01-02\nA,C,2010-13-01\n");
  try {
    ingest_events(p.string(), abc_2010());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("e.csv:3"), std::string::npos) << e.what();
  }
  const auto q = write_file(tmp.path / "f.csv", "source,target,date\nA,B\n");
  EXPECT_THROW(ingest_events(q.string(), abc_2010()), DataError);
  const auto nocol = write_file(tmp.path / "g.csv", "src,target,date\nA,B,2010-01-02\n");
  EXPECT_THROW(ingest_events(nocol.string(), abc_2010()), DataError);
  EXPECT_THROW(ingest_events((tmp.path / "missing.csv").string(), abc_2010()), DataError);
}

TEST(IngestEvents, EmptyResultIsDomainError) {
  TempDir tmp("events_empty");
  const auto p = write_file(tmp.path / "e.csv", "source,target,date\nA,A,2010-01-02\nA,B,2011-01-02\n");
  EXPECT_THROW(ingest_events(p.string(), abc_2010()), DomainError);
}

TEST(IngestEvents, WindowValidation) {
  TempDir tmp("events_window");
  const auto p = write_file(tmp.path / "e.csv", kEvents);
  auto w = abc_2010();
  w.end = w.start;
  EXPECT_THROW(ingest_events(p.string(), w), ConfigError);
  w = abc_2010();
  w.nodes = {"A"};
  EXPECT_THROW(ingest_events(p.string(), w), ConfigError);
  w.nodes = {"A", "B", "A"};
  EXPECT_THROW(ingest_events(p.string(), w), ConfigError);
}

TEST(IngestCovariates, ThreeNodeFixture) {
  TempDir tmp("cov");
  const double e = std::exp(1.0);
  char text[512];
  std::snprintf(text, sizeof text,
                "node,bin,value\n"
                "A,2010Q1,1\nA,2,10\nA,3,100\n"
                "B,1,%.17g\nB,2010Q2,%.17g\nB,2010Q3,%.17g\n"
                "C,1,4\nC,2,5\nZ,1,7\n",
                e, e * e, e * e * e);
  const auto cov = ingest_covariates(write_file(tmp.path / "c.csv", text).string(), abc_2010(), 1);
  ASSERT_EQ(cov.count(), 2u);
  ASSERT_EQ(cov.z[0].times(), 2u);
  // output bin 0 is raw bin 2 and reads raw bin 1
  const double logv[3][2] = {{0.0, std::log(10.0)}, {1.0, 2.0}, {std::log(4.0), std::log(5.0)}};
  for_each_dyad(3, 2, [&](std::size_t i, std::size_t j, std::size_t t) {
    EXPECT_NEAR(cov.z[0](i, j, t), logv[i][t], 1e-14);
    EXPECT_NEAR(cov.z[1](i, j, t), logv[j][t], 1e-14);
  });
  EXPECT_EQ(cov.z[0](1, 1, 0), 0.0);
  cov.validate(3, 2);
}

TEST(IngestCovariates, LagDropsFrontBinsAndOnesGiveZero) {
  TempDir tmp("cov_ones");
  std::string text = "node,bin,value\n";
  for (const char* n : {"A", "B", "C"})
    for (int t = 1; t <= 3; ++t) text += std::string(n) + "," + std::to_string(t) + ",1.0\n";
  const auto p = write_file(tmp.path / "c.csv", text).string();
  for (std::size_t lag : {0u, 1u, 2u}) {
    const auto cov = ingest_covariates(p, abc_2010(), lag);
    EXPECT_EQ(cov.z[0].times(), 3u - lag);
    for (const auto& z : cov.z)
      for (double x : z.raw()) EXPECT_EQ(x, 0.0);
  }
  EXPECT_THROW(ingest_covariates(p, abc_2010(), 3), ConfigError);

  TempDir ev("cov_events");
  const auto net = ingest_events(write_file(ev.path / "e.csv", kEvents).string(), abc_2010()).data;
  const auto trimmed = drop_front_bins(net, 1);
  EXPECT_EQ(trimmed.times(), 2u);
  EXPECT_EQ(trimmed.grid()[0], 2.0);
  for_each_dyad(3, 2, [&](std::size_t i, std::size_t j, std::size_t t) {
    EXPECT_EQ(trimmed.value(i, j, t), net.value(i, j, t + 1));
  });
}

TEST(IngestCovariates, Errors) {
  TempDir tmp("cov_bad");
  auto run = [&](const std::string& body) {
    return ingest_covariates(write_file(tmp.path / "c.csv", "node,bin,value\n" + body).string(), abc_2010(), 1);
  };
  try {
    run("A,1,1\nA,2,1\nB,1,1\nB,2,1\nC,1,1\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("node C"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2010Q2"), std::string::npos) << msg;
  }
  EXPECT_THROW(run("A,1,0\n"), DataError);
  EXPECT_THROW(run("A,1,-2\n"), DataError);
  EXPECT_THROW(run("A,1,abc\n"), DataError);
  EXPECT_THROW(run("A,1,1\nA,2010Q1,2\n"), DataError);
  EXPECT_THROW(run("A,2009Q4x,1\n"), DataError);
}

TEST(Container, NetworkRoundTripWithMissingCells) {
  TempDir tmp("net");
  auto sim = simulate([] {
    DgpConfig c;
    c.nodes = 5;
    c.times = 6;
    c.seed = 3;
    return c;
  }());
  auto data = holdout(sim.data, HoldoutRule::random_cells(0.2, 4)).masked;
  const std::vector<std::string> bins{"q1", "q2", "q3", "q4", "q5", "q6"};
  write_dataset(tmp.path, data, sim.cov, bins);
  const auto back = read_dataset(tmp.path);
  EXPECT_EQ(back.data, data);
  EXPECT_EQ(back.cov, sim.cov);
  EXPECT_EQ(back.bin_labels, bins);

  NetworkSeries irregular({"x", "y"}, TimeGrid({0.5, 1.25, 4.0}));
  irregular.set(0, 1, 2, 1);
  write_network(tmp.path / "irr", irregular);
  EXPECT_EQ(read_network(tmp.path / "irr"), irregular);
}

TEST(Container, RejectsCorruptFiles) {
  TempDir tmp("corrupt");
  NetworkSeries d({"x", "y", "z"}, TimeGrid::integers(2));
  d.set(0, 1, 0, 1);
  write_network(tmp.path / "n", d);
  EXPECT_THROW(read_covariates(tmp.path / "n"), DataError);  // wrong kind
  EXPECT_THROW(read_network(tmp.path / "absent"), DataError);
  fs::resize_file(tmp.path / "n" / "y.bin", 5);
  EXPECT_THROW(read_network(tmp.path / "n"), DataError);
  write_file(tmp.path / "n" / "meta.json", "{not json");
  EXPECT_THROW(read_network(tmp.path / "n"), DataError);
}

TEST(Container, MetaIsDeterministicText) {
  TempDir tmp("meta");
  NetworkSeries d({"x", "y"}, TimeGrid::integers(2));
  write_network(tmp.path / "a", d);
  write_network(tmp.path / "b", d);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto meta = slurp(tmp.path / "a" / "meta.json");
  EXPECT_EQ(meta, slurp(tmp.path / "b" / "meta.json"));
  const auto j = json::parse(meta);
  EXPECT_EQ(j["format"], "dlsn-columnar");
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["columns"]["y"]["shape"], json({2, 2, 2}));
}

TEST(Container, TraceRoundTrip) {
  TempDir tmp("trace");
  DgpConfig dgp;
  dgp.nodes = 4;
  dgp.times = 3;
  dgp.seed = 5;
  const auto sim = simulate(dgp);
  for (auto variant : {Variant::dlsn, Variant::naive, Variant::random_effect}) {
    HyperConfig cfg;
    cfg.h_star = 2;
    cfg.iterations = 30;
    cfg.burn_in = 10;
    cfg.thin = 4;
    cfg.variant = variant;
    cfg.seed = 9;
    const auto trace = run_chain(sim.data, sim.cov, cfg);
    const auto dir = tmp.path / to_string(variant);
    write_trace(dir, trace, {{"holdout", "last_slice"}});
    json attrs;
    const auto back = read_trace(dir, &attrs);
    EXPECT_EQ(attrs["holdout"], "last_slice");
    EXPECT_EQ(to_json_value(back.config), to_json_value(trace.config));
    EXPECT_EQ(back.labels, trace.labels);
    EXPECT_EQ(back.grid, trace.grid);
    EXPECT_EQ(back.jitter, trace.jitter);
    ASSERT_EQ(back.draws.size(), trace.draws.size());
    for (std::size_t d = 0; d < trace.draws.size(); ++d) {
      const auto &x = trace.draws[d], &y = back.draws[d];
      EXPECT_EQ(x.iteration, y.iteration);
      EXPECT_EQ(x.mu, y.mu);
      EXPECT_EQ(x.beta, y.beta);
      EXPECT_EQ(x.a, y.a);
      EXPECT_EQ(x.b, y.b);
      EXPECT_EQ(x.tau, y.tau);
      EXPECT_EQ(x.sigma2_eps, y.sigma2_eps);
      EXPECT_EQ(x.pi, y.pi);
      for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(x.xs[i], y.xs[i]);
        EXPECT_EQ(x.xr[i], y.xr[i]);
      }
    }
  }
}

TEST(Container, TruthRoundTrip) {
  TempDir tmp("truth");
  DgpConfig c;
  c.nodes = 5;
  c.times = 4;
  c.covariates = 2;
  c.seed = 6;
  const auto sim = simulate(c);
  write_truth(tmp.path / "dlsn", sim.truth);
  const auto back = read_truth(tmp.path / "dlsn");
  EXPECT_EQ(back.pi, sim.truth.pi);
  EXPECT_EQ(back.predictor, sim.truth.predictor);
  EXPECT_EQ(back.state.mu, sim.truth.state.mu);
  EXPECT_EQ(back.state.beta, sim.truth.state.beta);
  EXPECT_EQ(back.state.a, sim.truth.state.a);
  EXPECT_EQ(back.state.xr, sim.truth.state.xr);

  c.variant = DgpVariant::lsmdn;
  const auto ls = simulate(c);
  write_truth(tmp.path / "lsmdn", ls.truth);
  const auto lb = read_truth(tmp.path / "lsmdn");
  ASSERT_TRUE(lb.lsmdn.has_value());
  EXPECT_EQ(lb.lsmdn->radii, ls.truth.lsmdn->radii);
  EXPECT_EQ(lb.lsmdn->positions, ls.truth.lsmdn->positions);
  EXPECT_EQ(lb.lsmdn->beta_in, ls.truth.lsmdn->beta_in);
  EXPECT_EQ(lb.pi, ls.truth.pi);
}

TEST(Config, DefaultsAndEcho) {
  const auto c = parse_config_text("");
  EXPECT_EQ(c.hyper.h_star, 10u);
  EXPECT_EQ(c.hyper.iterations, 50000);
  EXPECT_EQ(c.hyper.burn_in, 5000);
  EXPECT_EQ(c.hyper.thin, 10);
  EXPECT_EQ(c.hyper.saved_draws(), 4500);
  EXPECT_EQ(c.hyper.shrink_a, 2.0);
  EXPECT_EQ(c.hyper.rho_ab, 0.5);
  EXPECT_EQ(c.hyper.k_x, 0.1);
  EXPECT_EQ(holdout_text(c.holdout), "last_slice");
  const auto text = config_text(c);
  EXPECT_EQ(config_text(parse_config_text(text)), text);
}

TEST(Config, ParsesEveryKindOfKey) {
  const auto c = parse_config_text(
      "# comment\n"
      "name = validation\n"
      "h_star = 4   # trailing\n"
      "k = 0.2\n"
      "rho_x = 0.3\n"
      "iterations = 500\nburn_in = 100\nthin = 2\n"
      "seed = 7, 8 ,9\n"
      "variant = random_effect\nmissing = marginalize\n"
      "holdout = random_cells:0.25:11\n"
      "dgp.variant = lsmdn\ndgp.nodes = 6\ndgp.radii = 1,2,3,4,5,6\ndgp.seed = 3\n"
      "expect.fit_auc = >= 0.85\n"
      "expect.tau_inv_3 = < 0.3\n");
  EXPECT_EQ(c.name, "validation");
  EXPECT_EQ(c.hyper.h_star, 4u);
  EXPECT_EQ(c.hyper.k_mu, 0.2);
  EXPECT_EQ(c.hyper.k_ab, 0.2);
  EXPECT_EQ(c.hyper.rho_x, 0.3);
  EXPECT_EQ(c.hyper.rho_ab, 0.5);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7, 8, 9}));
  EXPECT_EQ(c.chain(2).seed, 9u);
  EXPECT_EQ(c.hyper.variant, Variant::random_effect);
  EXPECT_EQ(c.hyper.missing, MissingPolicy::marginalize);
  ASSERT_TRUE(c.holdout.has_value());
  EXPECT_EQ(c.holdout->fraction, 0.25);
  EXPECT_EQ(c.holdout->seed, 11u);
  EXPECT_EQ(c.dgp.variant, DgpVariant::lsmdn);
  EXPECT_EQ((*c.dgp.radii)(5), 6.0);
  ASSERT_EQ(c.expect.size(), 2u);
  EXPECT_EQ(c.expect[1].metric, "tau_inv_3");
  EXPECT_EQ(c.expect[1].op, CompareOp::lt);
  EXPECT_TRUE(c.expect[1].holds(0.29));
  EXPECT_FALSE(c.expect[1].holds(0.3));
  const auto text = config_text(c);
  EXPECT_EQ(config_text(parse_config_text(text)), text);
}

TEST(Config, ErrorsNameTheLine) {
  auto msg = [](const std::string& text) {
    try {
      parse_config_text(text, "cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(msg("h_star = 2\nbogus = 1\n").find("cfg:2"), std::string::npos);
  EXPECT_NE(msg("h_star = 2\nbogus = 1\n").find("bogus"), std::string::npos);
  EXPECT_NE(msg("h_star = two\n").find("cfg:1"), std::string::npos);
  EXPECT_NE(msg("h_star\n").find("key = value"), std::string::npos);
  EXPECT_NE(msg("variant = ergm\n").find("cfg:1"), std::string::npos);
  EXPECT_NE(msg("expect.fit_auc = 0.9\n").find("op"), std::string::npos);
  EXPECT_NE(msg("holdout = random_cells:0.1\n"), "no error");
  EXPECT_NE(msg("burn_in = 60000\n"), "no error");  // validated after parsing
  EXPECT_NE(msg("seed = -1\n"), "no error");
  EXPECT_THROW(load_config("/nonexistent/dlsn.cfg"), ConfigError);
}

TEST(Report, SummaryFilesAndPredictions) {
  TempDir tmp("report");
  DgpConfig dgp;
  dgp.nodes = 4;
  dgp.times = 4;
  dgp.seed = 8;
  const auto sim = simulate(dgp);
  const auto h = holdout(sim.data, HoldoutRule::last_slice());
  HyperConfig cfg;
  cfg.h_star = 2;
  cfg.iterations = 120;
  cfg.burn_in = 60;
  cfg.thin = 1;
  const auto trace = run_chain(h.masked, sim.cov, cfg);
  const auto s = summarize_trace(trace, h.masked, sim.cov, h.held);
  write_summary(tmp.path / "r", s, h.masked, trace.draws.size());
  for (const char* f : {"summary.csv", "parameters.csv", "ab.csv", "pi_mean.csv", "reciprocity.csv", "ess.csv"})
    EXPECT_TRUE(fs::exists(tmp.path / "r" / f)) << f;
  std::ifstream in(tmp.path / "r" / "summary.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "fit_auc,pred_auc,fit_auc_per_draw,draws");
  EXPECT_EQ(split_csv(row)[0], csv_num(s.scores.fit_auc));
  EXPECT_EQ(split_csv(row)[3], "60");

  const auto preds = predict_held(trace, h.held);
  ASSERT_EQ(preds.size(), h.held.size());
  for (const auto& p : preds) {
    EXPECT_NEAR(p.mean, s.pi_mean(p.cell.i, p.cell.j, p.cell.t), 1e-12);
    EXPECT_LE(p.hpd.lo, p.mean + 1e-12);
    EXPECT_GE(p.hpd.hi, p.mean - 1e-12);
  }
  write_predictions(tmp.path / "pred.csv", preds, h.masked);
  const auto table = read_csv((tmp.path / "pred.csv").string());
  EXPECT_EQ(table.rows.size(), preds.size());
  EXPECT_EQ(table.header.back(), "y");
}

TEST(Report, CsvQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(split_csv(csv_field("say \"hi\", ok")), (std::vector<std::string>{"say \"hi\", ok"}));
  EXPECT_EQ(csv_num(0.1), "0.1");
}
