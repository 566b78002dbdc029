#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace
{

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "rmflab");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = rmflab::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<std::vector<std::string>> parse(const std::string& csv)
{
    std::istringstream is(csv);
    return rmflab::parse_csv(is);
}

TEST(Cli, HelpAndUsageErrors)
{
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"no-such-command"}).code, 2);
    EXPECT_EQ(run({"oracle-check", "--bogus"}).code, 2);
    EXPECT_EQ(run({"--model", "gaussian", "oracle-check"}).code, 2);
    EXPECT_EQ(run({"--format", "xml", "oracle-check"}).code, 2);
    EXPECT_EQ(run({"moments"}).code, 2);
    EXPECT_EQ(run({"--threads", "0", "oracle-check", "--x-max", "10"}).code, 2);
    EXPECT_EQ(run({"--epsilon", "0.3", "variance", "--points", "10"}).code, 2);
    const auto r = run({"--x-max", "5000000000", "simulate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("code=2"), std::string::npos);
    EXPECT_TRUE(r.out.empty());
}

TEST(Cli, ResourceErrorOnUnwritableOutput)
{
    const auto r = run({"--out", "/nonexistent-dir/x.csv", "oracle-check", "--x-max", "10", "--seeds", "1"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("code=3"), std::string::npos);
}

TEST(Cli, QuadratureFailureExitsThree)
{
    const auto r = run({"--quad-tol", "1e-300", "--tcut", "1e6", "euler", "--check", "parseval", "--sequences", "1"});
    EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, CsvHeaderAndQuoting)
{
    const auto r = run({"oracle-check", "--x-max", "50", "--seeds", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto recs = parse(r.out);
    ASSERT_EQ(recs.size(), 5u);
    EXPECT_EQ(recs[0], rmflab::columns());
    EXPECT_EQ(recs[1][0], "oracle-check");
    EXPECT_EQ(recs[1][11], "false");
    EXPECT_EQ(r.out.substr(r.out.size() - 2), "\r\n");
    EXPECT_EQ(rmflab::csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(rmflab::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    std::istringstream is("a,\"b,\"\"c\"\"\"\r\n1,2\n");
    const auto q = rmflab::parse_csv(is);
    ASSERT_EQ(q.size(), 2u);
    EXPECT_EQ(q[0][1], "b,\"c\"");
    EXPECT_EQ(q[1][1], "2");
}

TEST(Cli, FloatsRoundTrip)
{
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0})
        EXPECT_EQ(std::strtod(rmflab::format_double(v).c_str(), nullptr), v);
}

TEST(Cli, JsonMatchesCsv)
{
    const std::vector<std::string> args{"--model", "both", "euler", "--check", "product-expectation", "--x", "10",
                                        "--t", "0", "0.5", "--trials", "500"};
    auto csv_args = args, json_args = args;
    json_args.insert(json_args.begin(), {"--format", "json"});
    const auto c = run(csv_args);
    const auto j = run(json_args);
    ASSERT_EQ(c.code, 0) << c.err;
    ASSERT_EQ(j.code, 0) << j.err;
    const auto recs = parse(c.out);
    const auto arr = nlohmann::json::parse(j.out);
    ASSERT_EQ(arr.size() + 1, recs.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& o = arr[i];
        const auto& r = recs[i + 1];
        for (std::size_t k = 0; k < rmflab::columns().size(); ++k) {
            const auto& v = o.at(rmflab::columns()[k]);
            if (v.is_null())
                EXPECT_TRUE(r[k].empty());
            else if (v.is_string())
                EXPECT_EQ(v.get<std::string>(), r[k]);
            else if (v.is_boolean())
                EXPECT_EQ(v.get<bool>() ? "true" : "false", r[k]);
            else
                EXPECT_EQ(v.get<double>(), std::strtod(r[k].c_str(), nullptr)) << rmflab::columns()[k];
        }
    }
}

TEST(Cli, ByteIdenticalAcrossThreads)
{
    const std::vector<std::vector<std::string>> commands{
        {"simulate", "--x-max", "2000", "--trials", "6"},
        {"variance", "--x-max", "1000", "--trials", "50"},
        {"oracle-check", "--x-max", "300", "--seeds", "5"},
        {"moments", "--suite", "hypercontractive", "--m", "2", "--n", "30", "--trials", "2000"},
        {"euler", "--check", "sigma-event", "--x-prev", "30", "--trials", "5"},
    };
    for (const auto& cmd : commands) {
        std::vector<std::string> one{"--threads", "1"}, four{"--threads", "4"};
        one.insert(one.end(), cmd.begin(), cmd.end());
        four.insert(four.end(), cmd.begin(), cmd.end());
        const auto a = run(one), b = run(one), c = run(four);
        ASSERT_EQ(a.code, 0) << cmd[0] << a.err;
        EXPECT_EQ(a.out, b.out) << cmd[0];
        EXPECT_EQ(a.out, c.out) << cmd[0];
    }
}

TEST(Cli, SimulatePointRows)
{
    const auto r = run({"--model", "steinhaus", "--x-max", "1000", "--trials", "3", "--seed", "42", "simulate"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto recs = parse(r.out);
    const auto grid = rmf::test_points(0.1, 1000);
    std::size_t points = 0, sups = 0;
    bool summary = false;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        points += recs[i][7] == "normalized";
        sups += recs[i][7] == "normalized_sup";
        summary = summary || recs[i][7] == "normalized_sup_median";
        EXPECT_EQ(recs[i][1], "steinhaus");
    }
    EXPECT_EQ(points, 3 * grid.size());
    EXPECT_EQ(sups, 3u);
    EXPECT_TRUE(summary);
    // The trial sup equals the largest point value of that trial.
    double best = 0.0;
    for (std::size_t i = 1; i < recs.size(); ++i)
        if (recs[i][7] == "normalized" && recs[i][2] == "0")
            best = std::max(best, std::strtod(recs[i][8].c_str(), nullptr));
    for (std::size_t i = 1; i < recs.size(); ++i) {
        if (recs[i][7] == "normalized_sup" && recs[i][2] == "0") {
            EXPECT_EQ(std::strtod(recs[i][8].c_str(), nullptr), best);
        }
    }
}

TEST(Cli, OutFileMatchesStdout)
{
    const auto path = temp_path("rmflab_cli_out.csv");
    const std::vector<std::string> cmd{"oracle-check", "--x-max", "100", "--seeds", "2"};
    auto with_out = cmd;
    with_out.insert(with_out.begin(), {"--out", path});
    const auto a = run(cmd);
    ASSERT_EQ(run(with_out).code, 0);
    std::ifstream is(path, std::ios::binary);
    const std::string file((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    EXPECT_EQ(file, a.out);
    std::filesystem::remove(path);
}

TEST(Cli, TableCache)
{
    const auto path = temp_path("rmflab_cli_cache.spf");
    std::filesystem::remove(path);
    const std::vector<std::string> cmd{"--table-cache", path, "oracle-check", "--x-max", "200", "--seeds", "2"};
    const auto a = run(cmd);
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_TRUE(std::filesystem::exists(path));
    const auto b = run(cmd);
    EXPECT_EQ(a.out, b.out);
    EXPECT_TRUE(b.err.empty());
    // A cache for a different limit is ignored with a note.
    auto other = cmd;
    other[4] = "300";
    const auto c = run(other);
    EXPECT_EQ(c.code, 0);
    EXPECT_NE(c.err.find("note"), std::string::npos);
    std::filesystem::remove(path);
}

TEST(Cli, ViolationExitsOne)
{
    // report exits 1 when any input row is violated.
    const auto path = temp_path("rmflab_cli_violation.csv");
    {
        std::ofstream os(path, std::ios::binary);
        os << "experiment,model,trial,x,ell,m,t,stat,estimate,std_error,bound,violated\r\n"
           << "hypercontractive,rademacher,,10,,2,,moment,5,0.1,1,true\r\n";
    }
    const auto r = run({"report", path});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("Hypercontractive"), std::string::npos);
    std::filesystem::remove(path);
}

TEST(Cli, ReportSummarizesRuns)
{
    const auto p1 = temp_path("rmflab_cli_r1.csv"), p2 = temp_path("rmflab_cli_r2.csv");
    ASSERT_EQ(run({"--out", p1, "oracle-check", "--x-max", "100", "--seeds", "3"}).code, 0);
    ASSERT_EQ(run({"--out", p2, "--model", "both", "variance", "--x-max", "1000", "--trials", "100"}).code, 0);
    const auto r = run({"report", p1, p2});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("[oracle-check]"), std::string::npos);
    EXPECT_NE(r.out.find("[variance]"), std::string::npos);
    EXPECT_NE(r.out.find("no violations"), std::string::npos);
    EXPECT_EQ(run({"report", temp_path("rmflab_missing.csv")}).code, 3);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST(Cli, MomentSuitesRun)
{
    for (const auto& cmd : std::vector<std::vector<std::string>>{
             {"moments", "--suite", "hypercontractive", "--m", "2", "--n", "100", "--trials", "20000"},
             {"moments", "--suite", "submartingale-z", "--windows", "3", "--trials", "200"},
             {"--trials", "200", "moments", "--suite", "doob", "--sequence", "z", "--x-base", "200", "--p-max", "50"},
             {"--trials", "20", "moments", "--suite", "submartingale-y", "--seeds", "1", "--x-end", "12"},
         }) {
        const auto r = run(cmd);
        EXPECT_EQ(r.code, 0) << cmd[0] << " " << r.err;
        EXPECT_GT(parse(r.out).size(), 1u);
    }
}

} // namespace
