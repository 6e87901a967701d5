#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lattn/corpus.hpp"
#include "lattn/error.hpp"

using namespace lattn;
namespace fs = std::filesystem;

namespace {

Recipe make(const std::string& desc, const std::string& tf, const std::string& af) {
    Recipe r;
    r.description = desc;
    r.trigger_function = tf;
    r.trigger_channel = tf.substr(0, tf.find('.'));
    r.action_function = af;
    r.action_channel = af.substr(0, af.find('.'));
    return r;
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("lattn_corpus_test_" + name);
}

std::multiset<std::string> descriptions(const std::vector<Recipe>& rs) {
    std::multiset<std::string> out;
    for (const auto& r : rs) out.insert(r.description);
    return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation into tokens") {
    CHECK(tokenize("Autosave your Instagram photos to Dropbox") ==
          std::vector<std::string>{"autosave", "your", "instagram", "photos", "to", "dropbox"});
    CHECK(tokenize("Post! (now)") == std::vector<std::string>{"post", "!", "(", "now", ")"});
    CHECK(tokenize("a,b.c") == std::vector<std::string>{"a", ",", "b", ".", "c"});
    CHECK(tokenize("\"quoted\"") == std::vector<std::string>{"\"", "quoted", "\""});
    CHECK(tokenize("it's") == std::vector<std::string>{"it", "'", "s"});
    CHECK(tokenize("  spaced\t out \n") == std::vector<std::string>{"spaced", "out"});
    CHECK(tokenize("") == std::vector<std::string>{});
    for (const auto& t : tokenize("Mixed: CASE; tokens?")) CHECK(!t.empty());
}

TEST_CASE("vocabulary keeps the most frequent words with lexicographic ties") {
    std::vector<Recipe> corpus{
        make("b b b c c a a zz", "s.f", "t.g"),
        make("c zz", "s.f", "t.g"),
    };
    // Frequencies: b=3, c=3, a=2, zz=2.
    Vocab top2 = build_vocab(corpus, 2);
    CHECK(top2.size() == 4);  // PAD, UNK + 2 kept
    CHECK(top2.id_of("b") == 2);
    CHECK(top2.id_of("c") == 3);
    CHECK(top2.id_of("a") == Vocab::kUnkId);
    CHECK(top2.id_of("zz") == Vocab::kUnkId);

    Vocab top3 = build_vocab(corpus, 3);
    CHECK(top3.id_of("a") == 4);  // beats zz on the tie
    CHECK(top3.id_of("zz") == Vocab::kUnkId);

    Vocab all = build_vocab(corpus, 100);
    CHECK(all.size() == 6);
}

TEST_CASE("encode pads short sequences and clips long ones around the middle") {
    Vocab v;
    for (int i = 0; i < 40; ++i) {
        v.tokens.push_back("w" + std::to_string(i));
        v.ids["w" + std::to_string(i)] = static_cast<int>(v.tokens.size()) + 1;
    }

    std::vector<std::string> three{"w0", "w1", "w2"};
    auto padded = encode(three, v, 5);
    CHECK(padded == std::vector<int>{2, 3, 4, 0, 0});

    std::vector<std::string> thirty;
    for (int i = 0; i < 30; ++i) thirty.push_back("w" + std::to_string(i));
    auto clipped = encode(thirty, v, 25);
    REQUIRE(clipped.size() == 25);
    // First 12 tokens, then the last 13.
    for (int i = 0; i < 12; ++i) CHECK(clipped[i] == i + 2);
    for (int i = 0; i < 13; ++i) CHECK(clipped[12 + i] == 17 + i + 2);

    auto even = encode(thirty, v, 4);  // first 2, last 2
    CHECK(even == std::vector<int>{2, 3, 30, 31});

    CHECK(encode({"nope"}, v, 3) == std::vector<int>{1, 0, 0});
    CHECK_THROWS_AS(encode(three, v, 1), ConfigError);

    auto view = encode_tokens_view(three, 5);
    CHECK(view == std::vector<std::string>{"w0", "w1", "w2", "<PAD>", "<PAD>"});
    auto clipped_view = encode_tokens_view(thirty, 4);
    CHECK(clipped_view == std::vector<std::string>{"w0", "w1", "w28", "w29"});
}

TEST_CASE("vocab file round-trip preserves ids") {
    std::vector<Recipe> corpus{make("alpha beta gamma alpha", "s.f", "t.g")};
    Vocab v = build_vocab(corpus, 10);
    auto path = temp_file("vocab.txt");
    save_vocab(path.string(), v);
    Vocab r = load_vocab(path.string());
    CHECK(r.size() == v.size());
    for (const auto& t : v.tokens) CHECK(r.id_of(t) == v.id_of(t));
    fs::remove(path);
}

TEST_CASE("recipe jsonl round-trip and validation") {
    std::vector<Recipe> corpus{
        make("send a thing", "svc.new_item", "other.add_item"),
        make("do more", "svc.other_event", "other.add_item"),
    };
    corpus[0].args["trigger"]["filter"] = "all";
    corpus[0].args["action"]["folder"] = "inbox";

    auto path = temp_file("recipes.jsonl");
    save_recipes(path.string(), corpus);
    auto loaded = load_recipes(path.string());
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].description == "send a thing");
    CHECK(loaded[0].trigger_function == "svc.new_item");
    CHECK(loaded[0].args.at("trigger").at("filter") == "all");
    CHECK(loaded[1].args.empty());
    fs::remove(path);

    auto bad = temp_file("bad.jsonl");
    auto write_line = [&](const std::string& line) {
        std::ofstream out(bad.string());
        out << line << "\n";
    };

    write_line("not json at all");
    CHECK_THROWS_AS(load_recipes(bad.string()), ValidationError);

    write_line(R"({"description":"x","trigger_channel":"a","trigger_function":"a.f","action_channel":"b"})");
    CHECK_THROWS_AS(load_recipes(bad.string()), ValidationError);

    write_line(R"({"description":"","trigger_channel":"a","trigger_function":"a.f","action_channel":"b","action_function":"b.g"})");
    CHECK_THROWS_AS(load_recipes(bad.string()), ValidationError);

    // Function label must start with its channel.
    write_line(R"({"description":"x","trigger_channel":"a","trigger_function":"zzz.f","action_channel":"b","action_function":"b.g"})");
    CHECK_THROWS_AS(load_recipes(bad.string()), ValidationError);

    CHECK_THROWS_AS(load_recipes("/nonexistent/nope.jsonl"), ValidationError);
    fs::remove(bad);
}

TEST_CASE("label space is dense, sorted, and channel-aware") {
    std::vector<Recipe> corpus{
        make("one", "beta.f2", "x.a"),
        make("two", "alpha.f1", "x.a"),
        make("three", "beta.f1", "y.b"),
        make("four", "beta.f2", "y.b"),
    };
    LabelSpace trig = build_label_space(corpus, Target::kTriggerFunction);
    CHECK(trig.num_functions() == 3);
    CHECK(trig.functions == std::vector<std::string>{"alpha.f1", "beta.f1", "beta.f2"});
    CHECK(trig.function_id("beta.f1") == 1);
    CHECK(trig.function_id("nope") == -1);
    CHECK(trig.num_channels() == 2);
    CHECK(trig.channel_of(0) == "alpha");
    CHECK(trig.channel_of(2) == "beta");
    CHECK_THROWS_AS(trig.channel_of(17), ValidationError);

    LabelSpace act = build_label_space(corpus, Target::kActionFunction);
    CHECK(act.functions == std::vector<std::string>{"x.a", "y.b"});

    auto path = temp_file("labels.txt");
    save_labels(path.string(), trig);
    LabelSpace r = load_labels(path.string());
    CHECK(r.functions == trig.functions);
    CHECK(r.channel_of(1) == "beta");
    fs::remove(path);
}

TEST_CASE("target accessors pick the requested side") {
    Recipe r = make("d", "t.f", "a.g");
    CHECK(target_function(r, Target::kTriggerFunction) == "t.f");
    CHECK(target_function(r, Target::kActionFunction) == "a.g");
    CHECK(target_channel(r, Target::kTriggerFunction) == "t");
    CHECK(target_channel(r, Target::kActionFunction) == "a");
}

TEST_CASE("encode_dataset attaches targets and rejects unknown labels when strict") {
    std::vector<Recipe> corpus{make("alpha beta", "s.f", "t.g")};
    Vocab v = build_vocab(corpus, 10);
    LabelSpace labels = build_label_space(corpus, Target::kTriggerFunction);

    auto enc = encode_dataset(corpus, v, labels, Target::kTriggerFunction, 4);
    REQUIRE(enc.size() == 1);
    CHECK(enc[0].ids.size() == 4);
    CHECK(enc[0].target == 0);

    std::vector<Recipe> other{make("alpha", "unknown.f", "t.g")};
    CHECK_THROWS_AS(encode_dataset(other, v, labels, Target::kTriggerFunction, 4),
                    ValidationError);
    auto lenient = encode_dataset(other, v, labels, Target::kTriggerFunction, 4, false);
    CHECK(lenient[0].target == -1);
}

TEST_CASE("top_k_functions ranks by frequency then name") {
    std::vector<Recipe> corpus;
    for (int i = 0; i < 3; ++i) corpus.push_back(make("d", "b.high", "x.a"));
    for (int i = 0; i < 2; ++i) corpus.push_back(make("d", "c.mid", "x.a"));
    for (int i = 0; i < 2; ++i) corpus.push_back(make("d", "a.mid", "x.a"));
    corpus.push_back(make("d", "d.low", "x.a"));

    CHECK(top_k_functions(corpus, 1) == std::set<std::string>{"b.high"});
    CHECK(top_k_functions(corpus, 2) == std::set<std::string>{"b.high", "a.mid"});
    CHECK(top_k_functions(corpus, 3) == std::set<std::string>{"b.high", "a.mid", "c.mid"});
    CHECK(top_k_functions(corpus, 100).size() == 4);
}

TEST_CASE("build_skewed keeps S and samples the rest without replacement") {
    std::vector<Recipe> corpus;
    for (int i = 0; i < 20; ++i)
        corpus.push_back(make("maj " + std::to_string(i), "big.f", "x.a"));
    for (int i = 0; i < 7; ++i)
        corpus.push_back(make("min " + std::to_string(i), "small.f", "x.a"));
    for (int i = 0; i < 2; ++i)
        corpus.push_back(make("tiny " + std::to_string(i), "tiny.f", "x.a"));
    std::set<std::string> S{"big.f"};

    auto skewed = build_skewed(corpus, S, 3, 5);
    std::map<std::string, int> by_func;
    std::set<std::string> seen;
    for (const auto& r : skewed) {
        ++by_func[r.trigger_function];
        CHECK(seen.insert(r.description).second);  // no duplicates
    }
    CHECK(by_func["big.f"] == 20);
    CHECK(by_func["small.f"] == 3);
    CHECK(by_func["tiny.f"] == 2);  // fewer available than requested

    // Deterministic under the seed, different under another.
    auto again = build_skewed(corpus, S, 3, 5);
    REQUIRE(again.size() == skewed.size());
    for (size_t i = 0; i < skewed.size(); ++i)
        CHECK(again[i].description == skewed[i].description);
    auto other = build_skewed(corpus, S, 3, 6);
    CHECK(descriptions(other) != descriptions(skewed));
}

TEST_CASE("rebalancing mirrors skewing on the complement set") {
    std::vector<Recipe> corpus;
    for (int i = 0; i < 12; ++i)
        corpus.push_back(make("a " + std::to_string(i), "amaj.f", "x.a"));
    for (int i = 0; i < 9; ++i)
        corpus.push_back(make("b " + std::to_string(i), "bmaj.f", "x.a"));
    for (int i = 0; i < 8; ++i)
        corpus.push_back(make("c " + std::to_string(i), "cmin.f", "x.a"));
    std::set<std::string> S{"amaj.f", "bmaj.f"};
    std::set<std::string> comp{"cmin.f"};

    auto skewed = build_skewed(corpus, comp, 4, 9);
    auto rebalanced = build_rebalanced(corpus, S, 4, 9);
    CHECK(descriptions(skewed) == descriptions(rebalanced));

    std::map<std::string, int> by_func;
    for (const auto& r : rebalanced) ++by_func[r.trigger_function];
    CHECK(by_func["amaj.f"] == 4);
    CHECK(by_func["bmaj.f"] == 4);
    CHECK(by_func["cmin.f"] == 8);
}
