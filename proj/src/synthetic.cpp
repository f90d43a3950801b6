#include "bioner/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "bioner/errors.hpp"
#include "bioner/rng.hpp"

namespace bioner {

namespace {

const std::vector<std::string> kOnsets{"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "tr"};
const std::vector<std::string> kVowels{"a", "e", "i", "o", "u"};

const std::vector<std::string> kDiseaseSuffixes{"itis", "oma", "osis", "emia", "pathy", "algia"};
const std::vector<std::string> kDiseaseHeads{"syndrome", "disease", "dystrophy", "fever"};
const std::vector<std::string> kChemicalSuffixes{"ine", "ol", "ide", "azole", "mycin", "pril", "ate"};
const std::vector<std::string> kAdjSuffixes{"al", "ic", "ous", "ive"};

// Slots: D disease, C chemical, N noun, V verb, A adjective, # number.
const std::vector<std::string> kTemplates{
    "Patients with D were treated with C .",
    "C induced D in # A N .",
    "The V N of C was associated with D .",
    "We report a case of D following C therapy .",
    "A N of D was observed after C administration .",
    "N and N were V in the A N .",
    "D is a A N characterized by A N .",
    "Treatment with C V the N of D in # patients .",
    "The A N V C levels .",
    "No N of D was V with C or C .",
    "C , a A N , V the N .",
    "Risk of D V with A N .",
    "These N suggest that C may prevent D .",
    "The N was V by # mg of C .",
    "In # cases , D V after the N .",
    "Both C and C reduced the N of A D .",
    "The A N of the N was V .",
    "Serum N V in patients with D and D .",
};

class Zipf {
public:
    Zipf(std::size_t n, double exponent) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
            cumulative_.push_back(total);
        }
        for (auto& c : cumulative_) c /= total;
    }

    std::size_t draw(Rng& rng) const {
        const double u = rng.uniform();
        auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
        return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
    }

private:
    std::vector<double> cumulative_;
};

class WordMaker {
public:
    explicit WordMaker(Rng& rng) : rng_(rng) {}

    // A fresh stem of 2-3 syllables, never handed out twice.
    std::string stem() {
        while (true) {
            std::string s;
            const std::size_t syllables = 2 + rng_.index(2);
            for (std::size_t i = 0; i < syllables; ++i) {
                s += kOnsets[rng_.index(kOnsets.size())];
                s += kVowels[rng_.index(kVowels.size())];
            }
            if (used_.insert(s).second) return s;
        }
    }

    std::string pick(const std::vector<std::string>& v) { return v[rng_.index(v.size())]; }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

struct Lexicons {
    std::vector<std::string> diseases, chemicals, nouns, verbs, adjectives;
};

Lexicons make_lexicons(const SyntheticOptions& o, Rng& rng) {
    WordMaker mk(rng);
    Lexicons lx;
    for (std::size_t i = 0; i < o.nouns; ++i) {
        // Every tenth noun borrows an entity suffix so that spelling alone is not enough.
        if (i % 10 == 9) lx.nouns.push_back(mk.stem() + (i % 20 == 9 ? mk.pick(kChemicalSuffixes) : mk.pick(kDiseaseSuffixes)));
        else lx.nouns.push_back(mk.stem());
    }
    for (std::size_t i = 0; i < o.verbs; ++i) lx.verbs.push_back(mk.stem() + "ed");
    for (std::size_t i = 0; i < o.adjectives; ++i) lx.adjectives.push_back(mk.stem() + mk.pick(kAdjSuffixes));
    for (std::size_t i = 0; i < o.diseases; ++i) {
        const std::size_t form = rng.index(10);
        if (form < 6) lx.diseases.push_back(mk.stem() + mk.pick(kDiseaseSuffixes));
        else if (form < 9) lx.diseases.push_back(mk.stem() + "an " + mk.pick(kDiseaseHeads));
        else lx.diseases.push_back("acute " + mk.stem() + mk.pick(kDiseaseSuffixes));
    }
    for (std::size_t i = 0; i < o.chemicals; ++i) {
        const std::size_t form = rng.index(10);
        if (form < 8) lx.chemicals.push_back(mk.stem() + mk.pick(kChemicalSuffixes));
        else lx.chemicals.push_back(std::to_string(2 + rng.index(8)) + "-" + mk.stem() + mk.pick(kChemicalSuffixes));
    }
    // "acute" is also an ordinary adjective, so its tag depends on what follows.
    lx.adjectives.push_back("acute");
    return lx;
}

std::string number(Rng& rng) {
    if (rng.index(3) == 0) return std::to_string(1 + rng.index(20)) + "." + std::to_string(rng.index(10));
    return std::to_string(2 + rng.index(200));
}

void append(RawSentence& s, const std::string& phrase, const std::string& type) {
    const auto words = split_words(phrase);
    for (std::size_t i = 0; i < words.size(); ++i) {
        s.tokens.push_back(words[i]);
        s.tags.push_back(type.empty() ? "O" : (i == 0 ? "B-" : "I-") + type);
    }
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticOptions& o) {
    if (o.sentences == 0) throw ConfigError("synthetic corpus needs at least one sentence");
    if (o.train_fraction <= 0.0 || o.dev_fraction <= 0.0 || o.train_fraction + o.dev_fraction >= 1.0) {
        throw ConfigError("synthetic split fractions must be positive and leave room for a test split");
    }
    Rng rng(o.seed);
    const Lexicons lx = make_lexicons(o, rng);
    const Zipf zd(lx.diseases.size(), o.zipf_exponent), zc(lx.chemicals.size(), o.zipf_exponent),
        zn(lx.nouns.size(), o.zipf_exponent), zv(lx.verbs.size(), o.zipf_exponent),
        za(lx.adjectives.size(), o.zipf_exponent);

    std::vector<RawSentence> all;
    for (std::size_t k = 0; k < o.sentences; ++k) {
        RawSentence s;
        for (const auto& slot : split_words(kTemplates[rng.index(kTemplates.size())])) {
            if (slot == "D") append(s, lx.diseases[zd.draw(rng)], "Disease");
            else if (slot == "C") append(s, lx.chemicals[zc.draw(rng)], "Chemical");
            else if (slot == "N") append(s, lx.nouns[zn.draw(rng)], "");
            else if (slot == "V") append(s, lx.verbs[zv.draw(rng)], "");
            else if (slot == "A") append(s, lx.adjectives[za.draw(rng)], "");
            else if (slot == "#") append(s, number(rng), "");
            else append(s, slot, "");
        }
        all.push_back(std::move(s));
    }

    SyntheticCorpus out;
    const auto n_train = static_cast<std::size_t>(std::llround(o.train_fraction * static_cast<double>(o.sentences)));
    const auto n_dev = static_cast<std::size_t>(std::llround(o.dev_fraction * static_cast<double>(o.sentences)));
    for (std::size_t k = 0; k < all.size(); ++k) {
        if (k < n_train) out.train.push_back(std::move(all[k]));
        else if (k < n_train + n_dev) out.dev.push_back(std::move(all[k]));
        else out.test.push_back(std::move(all[k]));
    }
    return out;
}

}  // namespace bioner
