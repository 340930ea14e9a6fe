#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pianoscribe/acoustic/posteriogram.hpp"
#include "pianoscribe/cli/cli.hpp"
#include "pianoscribe/common/file_util.hpp"
#include "pianoscribe/features/audio.hpp"
#include "pianoscribe/features/features.hpp"
#include "pianoscribe/pianoroll/midi.hpp"
#include "pianoscribe/pianoroll/pianoroll.hpp"

using namespace pianoscribe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("pianoscribe_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<unsigned char> bytes(const fs::path& p) { return io::read_file_bytes(p); }

std::vector<std::string> column(const fs::path& manifest, std::size_t col)
{
    std::ifstream in(manifest);
    std::vector<std::string> out;
    std::string a, b;
    while (in >> a >> b) out.push_back((manifest.parent_path() / (col == 0 ? a : b)).string());
    return out;
}

std::vector<std::string> with_ext(const fs::path& dir, const std::vector<std::string>& inputs, const std::string& ext)
{
    std::vector<std::string> out;
    for (const auto& i : inputs) out.push_back((dir / (fs::path(i).stem().string() + ext)).string());
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// A small corpus and trained models shared by the pipeline tests.
struct Pipeline {
    fs::path dir = scratch("pipeline");
    fs::path toy = dir / "toy";
    fs::path am = dir / "am.psnn";
    fs::path lm = dir / "lm.psnn";
    Outcome gen, train_am, train_lm;

    std::vector<std::string> acoustic_args(const fs::path& out) const
    {
        return {"train-acoustic", "--train", (toy / "train.txt").string(), "--valid", (toy / "valid.txt").string(),
                "--out", out.string(), "--log", (dir / "am_log.csv").string(), "--seed", "5", "--model", "dnn",
                "--hidden", "8", "--epochs", "2"};
    }
    std::vector<std::string> mlm_args(const fs::path& out) const
    {
        return {"train-mlm", "--train", (toy / "train.txt").string(), "--valid", (toy / "valid.txt").string(),
                "--out", out.string(), "--seed", "5", "--rnn-hidden", "4", "--nade-hidden", "4", "--epochs", "2"};
    }

    Pipeline()
    {
        gen = run({"gen-toy", "--out-dir", toy.string(), "--seed", "3", "--tracks", "6", "--duration", "1"});
        train_am = run(acoustic_args(am));
        train_lm = run(mlm_args(lm));
    }
};

const Pipeline& pipeline()
{
    static const Pipeline p;
    return p;
}

} // namespace

TEST_CASE("usage errors exit with code 2 and help exits 0")
{
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"no-such-command"}).code == cli::kExitUsage);
    CHECK(run({"decode", "--no-such-flag"}).code == cli::kExitUsage);
    const auto empty = run({"extract"});
    CHECK(empty.code == cli::kExitUsage);
    CHECK(empty.err.find("no input files") != std::string::npos);
    const auto help = run({"--help"});
    CHECK(help.code == cli::kExitOk);
    CHECK(help.out.find("gen-toy") != std::string::npos);
    CHECK(run({"decode", "x.pspg", "--post", "beam"}).code == cli::kExitUsage);
}

TEST_CASE("extract turns one second of 44.1 kHz audio into 252-bin features")
{
    const auto dir = scratch("extract_audio");
    features::Audio audio;
    audio.sample_rate = 44100;
    for (int i = 0; i < 44100; ++i) audio.samples.push_back(0.3 * std::sin(2.0 * std::numbers::pi * 440.0 * i / 44100.0));
    features::save_wav(dir / "tone.wav", audio);
    const auto r = run({"extract", (dir / "tone.wav").string(), "--out-dir", (dir / "out").string()});
    REQUIRE(r.code == cli::kExitOk);
    const auto fs_out = features::load_features(dir / "out" / "tone.psft");
    CHECK((fs_out.length() == 31 || fs_out.length() == 32));
    CHECK(fs_out.dims() == 252);
    CHECK(r.out.find("frames") != std::string::npos);
}

TEST_CASE("extract converts MIDI to the roll of its events and reports bad files")
{
    const auto dir = scratch("extract_midi");
    const std::vector<roll::NoteEvent> notes{{60, 0.0, 0.5}, {64, 0.25, 1.0}, {67, 0.5, 1.2}};
    const auto midi = roll::events_to_midi(notes);
    {
        std::ofstream f(dir / "fixture.mid", std::ios::binary);
        f.write(reinterpret_cast<const char*>(midi.data()), static_cast<std::streamsize>(midi.size()));
        std::ofstream bad(dir / "broken.mid", std::ios::binary);
        bad << "not a midi file";
    }
    const auto r = run({"extract", (dir / "fixture.mid").string(), (dir / "broken.mid").string(), "--out-dir",
                        (dir / "out").string()});
    CHECK(r.code == cli::kExitFailure);
    CHECK(r.err.find("broken.mid") != std::string::npos);
    const auto events = roll::midi_to_events(midi).events;
    double end = 0.0;
    for (const auto& e : events) end = std::max(end, e.offset);
    CHECK(roll::load_roll(dir / "out" / "fixture.pspr") == roll::events_to_roll(events, 31.25, end));
    CHECK_FALSE(fs::exists(dir / "out" / "broken.pspr"));
}

TEST_CASE("gen-toy writes audio, MIDI and split manifests deterministically")
{
    const auto& p = pipeline();
    REQUIRE(p.gen.code == cli::kExitOk);
    CHECK(column(p.toy / "train.txt", 0).size() == 4);
    CHECK(column(p.toy / "valid.txt", 0).size() == 1);
    CHECK(column(p.toy / "test.txt", 0).size() == 1);
    const auto again = scratch("gen_again");
    REQUIRE(run({"gen-toy", "--out-dir", again.string(), "--seed", "3", "--tracks", "6", "--duration", "1"}).code == 0);
    CHECK(bytes(again / "audio" / "toy_0003.wav") == bytes(p.toy / "audio" / "toy_0003.wav"));
    CHECK(bytes(again / "midi" / "toy_0003.mid") == bytes(p.toy / "midi" / "toy_0003.mid"));
    CHECK(bytes(again / "test.txt") == bytes(p.toy / "test.txt"));
}

TEST_CASE("training is byte-identical for a fixed seed")
{
    const auto& p = pipeline();
    REQUIRE(p.train_am.code == cli::kExitOk);
    REQUIRE(p.train_lm.code == cli::kExitOk);
    CHECK(fs::exists(p.dir / "am_log.csv"));
    const auto am2 = p.dir / "am2.psnn";
    const auto lm2 = p.dir / "lm2.psnn";
    REQUIRE(run(p.acoustic_args(am2)).code == cli::kExitOk);
    REQUIRE(run(p.mlm_args(lm2)).code == cli::kExitOk);
    CHECK(bytes(am2) == bytes(p.am));
    CHECK(bytes(lm2) == bytes(p.lm));
}

TEST_CASE("training needs a seed and a validation set")
{
    const auto& p = pipeline();
    auto args = p.mlm_args(p.dir / "unused.psnn");
    auto no_valid = args;
    no_valid.erase(no_valid.begin() + 3, no_valid.begin() + 5);
    const auto r = run(no_valid);
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("--valid") != std::string::npos);

    auto no_seed = args;
    const auto seed_at = std::ranges::find(no_seed, "--seed") - no_seed.begin();
    no_seed.erase(no_seed.begin() + seed_at, no_seed.begin() + seed_at + 2);
    CHECK(run(no_seed).code == cli::kExitUsage);

    ::setenv("PS_SEED", "5", 1);
    const auto from_env = p.dir / "env.psnn";
    auto env_args = no_seed;
    env_args[6] = from_env.string();
    CHECK(run(env_args).code == cli::kExitOk);
    ::unsetenv("PS_SEED");
    CHECK(bytes(from_env) == bytes(p.lm));
}

TEST_CASE("decode: threshold 1.0 gives an empty transcription")
{
    const auto& p = pipeline();
    const auto dir = scratch("decode_threshold");
    const auto audio = column(p.toy / "test.txt", 0);
    auto args = concat({"decode"}, audio);
    args = concat(args, {"--acoustic", p.am.string(), "--post", "threshold", "--threshold", "1.0", "--out-dir",
                         dir.string(), "--save-posteriogram"});
    const auto r = run(args);
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.out.find("total log score") != std::string::npos);
    for (const auto& f : with_ext(dir, audio, ".pspr")) CHECK(roll::load_roll(f).active_count() == 0);
    for (const auto& f : with_ext(dir, audio, ".csv")) CHECK(roll::load_events_csv(f).empty());
    for (const auto& f : with_ext(dir, audio, ".pspg")) CHECK(acoustic::load_posteriogram(f).pitches() == 88);
}

TEST_CASE("decode: hybrid and hmm modes are deterministic")
{
    const auto& p = pipeline();
    const auto pg_dir = scratch("decode_pg");
    const auto audio = column(p.toy / "test.txt", 0);
    REQUIRE(run(concat(concat({"decode"}, audio), {"--acoustic", p.am.string(), "--post", "threshold", "--out-dir",
                                                    pg_dir.string(), "--save-posteriogram"}))
                .code == cli::kExitOk);
    const auto pgs = with_ext(pg_dir, audio, ".pspg");
    for (const std::string post : {"hybrid", "hmm"}) {
        const auto a = scratch("decode_a_" + post), b = scratch("decode_b_" + post);
        const auto ra = run(concat(concat({"decode"}, pgs), {"--mlm", p.lm.string(), "--post", post, "--out-dir", a.string()}));
        const auto rb = run(concat(concat({"decode"}, pgs),
                                   {"--mlm", p.lm.string(), "--post", post, "--out-dir", b.string(), "--jobs", "2"}));
        REQUIRE(ra.code == cli::kExitOk);
        REQUIRE(rb.code == cli::kExitOk);
        for (std::size_t i = 0; i < pgs.size(); ++i) {
            CHECK(bytes(with_ext(a, pgs, ".pspr")[i]) == bytes(with_ext(b, pgs, ".pspr")[i]));
            CHECK(bytes(with_ext(a, pgs, ".csv")[i]) == bytes(with_ext(b, pgs, ".csv")[i]));
        }
    }
}

TEST_CASE("decode: dimension mismatches name both sizes")
{
    const auto& p = pipeline();
    const auto dir = scratch("decode_dims");
    acoustic::Posteriogram pg;
    pg.probs = nn::Matrix::Constant(5, 10, 0.3);
    acoustic::save_posteriogram(dir / "narrow.pspg", pg);
    const auto r = run({"decode", (dir / "narrow.pspg").string(), "--mlm", p.lm.string(), "--out-dir", dir.string()});
    CHECK(r.code == cli::kExitFailure);
    CHECK(r.err.find("10") != std::string::npos);
    CHECK(r.err.find("88") != std::string::npos);

    features::FeatureSequence feats;
    feats.frames = nn::Matrix::Zero(4, 20);
    features::save_features(dir / "narrow.psft", feats);
    const auto r2 = run({"decode", (dir / "narrow.psft").string(), "--acoustic", p.am.string(), "--post", "threshold",
                         "--out-dir", dir.string()});
    CHECK(r2.code == cli::kExitFailure);
    CHECK(r2.err.find("20") != std::string::npos);
    CHECK(r2.err.find("252") != std::string::npos);
}

TEST_CASE("config file values apply unless overridden by flags")
{
    const auto& p = pipeline();
    const auto dir = scratch("config");
    const auto audio = column(p.toy / "test.txt", 0);
    {
        std::ofstream cfg(dir / "run.toml");
        cfg << "[decode]\npost = \"threshold\"\nthreshold = 1.0\n";
    }
    const auto base = concat(concat({"--config", (dir / "run.toml").string(), "decode"}, audio),
                             {"--acoustic", p.am.string(), "--out-dir", dir.string()});
    REQUIRE(run(base).code == cli::kExitOk);
    const auto pspr = with_ext(dir, audio, ".pspr").front();
    CHECK(roll::load_roll(pspr).active_count() == 0);
    REQUIRE(run(concat(base, {"--threshold", "0.0"})).code == cli::kExitOk);
    CHECK(roll::load_roll(pspr).active_count() > 0);
}

TEST_CASE("evaluate: identical, disjoint and mismatched inputs")
{
    const auto& p = pipeline();
    const auto dir = scratch("evaluate");
    const auto midi = column(p.toy / "train.txt", 1);
    const auto report = dir / "report.json";

    auto same = run(concat(concat(concat({"evaluate", "--report", report.string(), "--pred"}, midi), {"--truth"}), midi));
    REQUIRE(same.code == cli::kExitOk);
    auto json = nlohmann::json::parse(std::ifstream(report));
    CHECK(json["corpus"]["frame"]["f_measure"].get<double>() == 1.0);
    CHECK(json["corpus"]["note"]["f_measure"].get<double>() == 1.0);
    std::size_t tp = 0, fp = 0;
    for (const auto& t : json["tracks"]) {
        CHECK(t["frame"]["f_measure"].get<double>() == 1.0);
        tp += t["note"]["tp"].get<std::size_t>();
        fp += t["note"]["fp"].get<std::size_t>();
    }
    CHECK(tp == json["corpus"]["note"]["tp"].get<std::size_t>());
    CHECK(fp == json["corpus"]["note"]["fp"].get<std::size_t>());

    // Shift every note up an octave, so no pitch overlaps the truth.
    std::vector<std::string> shifted;
    for (std::size_t i = 0; i < midi.size(); ++i) {
        auto notes = roll::midi_to_events(io::read_file_bytes(midi[i])).events;
        for (auto& n : notes) n.pitch += 12;
        shifted.push_back((dir / ("shift" + std::to_string(i) + ".csv")).string());
        roll::save_events_csv(shifted.back(), notes);
    }
    REQUIRE(run(concat(concat(concat({"evaluate", "--report", report.string(), "--pred"}, shifted), {"--truth"}), midi))
                .code == cli::kExitOk);
    json = nlohmann::json::parse(std::ifstream(report));
    CHECK(json["corpus"]["frame"]["f_measure"].get<double>() == 0.0);
    CHECK(json["corpus"]["note"]["f_measure"].get<double>() == 0.0);

    const std::vector<std::string> one_truth{midi.front()};
    const auto mismatch = run(concat(concat(concat({"evaluate", "--pred"}, midi), {"--truth"}), one_truth));
    CHECK(mismatch.code == cli::kExitUsage);
}

TEST_CASE("bench-beam writes rows for both decoders")
{
    const auto& p = pipeline();
    const auto dir = scratch("bench");
    const auto audio = column(p.toy / "test.txt", 0);
    const auto midi = column(p.toy / "test.txt", 1);
    REQUIRE(run(concat(concat({"decode"}, audio), {"--acoustic", p.am.string(), "--post", "threshold", "--out-dir",
                                                    dir.string(), "--save-posteriogram"}))
                .code == cli::kExitOk);
    const auto csv = dir / "bench.csv";
    const auto r = run(concat(concat(concat({"bench-beam", "--mlm", p.lm.string(), "--widths", "1,2", "--out", csv.string(),
                                             "--posteriogram"},
                                            with_ext(dir, audio, ".pspg")),
                                     {"--truth"}),
                              midi));
    REQUIRE(r.code == cli::kExitOk);
    std::ifstream in(csv);
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "decoder,beam_width,frame_f,note_f,wall_seconds,prior_evaluations");
    std::vector<std::string> keys;
    while (std::getline(in, line)) keys.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
    CHECK(keys == std::vector<std::string>{"hashed,1", "hashed,2", "legacy,1", "legacy,2"});
}
