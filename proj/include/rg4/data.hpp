#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rg4::data {

// Scenario codes: single/multi view x without/with a prior report.
enum class Scenario { sn, sw, mn, mw };

bool has_lateral(Scenario s);
bool has_prior(Scenario s);
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);
inline constexpr std::array<Scenario, 4> kScenarios = {Scenario::sn, Scenario::sw, Scenario::mn,
                                                       Scenario::mw};

struct CategoryFlags {
    bool pc = false;
    bool pp = false;
    bool view = false;
    bool comm = false;

    bool any() const { return pc || pp || view || comm; }
    int count() const { return int(pc) + int(pp) + int(view) + int(comm); }
    CategoryFlags operator&(const CategoryFlags& o) const {
        return {pc && o.pc, pp && o.pp, view && o.view, comm && o.comm};
    }
    bool operator==(const CategoryFlags&) const = default;
};

// Word-level vocabulary; id 0 is <unk>, id 1 is <eos>.
class Vocab {
public:
    Vocab() = default;
    explicit Vocab(const std::vector<std::string>& words);

    int id(const std::string& word) const;
    const std::string& word(int id) const;
    int size() const { return static_cast<int>(words_.size()); }
    int unk() const { return 0; }
    int eos() const { return 1; }

    std::vector<int> tokenize(const std::string& text) const;
    std::string detokenize(const std::vector<int>& ids) const;

private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

enum class SentTag { none, pc, pp, view, comm };
enum class Section { findings, impression };

std::string to_string(SentTag t);
SentTag tag_from_string(const std::string& s);

struct Sentence {
    int begin = 0;  // token span [begin, end)
    int end = 0;
    SentTag tag = SentTag::none;
    Section section = Section::findings;
    bool marker = false;  // the "impression ." section header
};

// 14 label slots, each -1 uncertain / 0 negative / 1 positive / 2 not
// mentioned; slot 13 is the no-finding slot.
using LabelVector = std::array<int, 14>;
inline LabelVector not_mentioned_labels() {
    LabelVector v;
    v.fill(2);
    return v;
}

struct ReportDoc {
    std::string text;
    std::vector<int> tokens;
    std::vector<Sentence> sentences;
    LabelVector labels = not_mentioned_labels();

    // Tokenizes and splits into sentences at '.' tokens; sentences after the
    // "impression ." marker belong to the impression section. Tags default
    // to none; labels to not-mentioned.
    static ReportDoc from_text(const Vocab& vocab, const std::string& text);

    std::vector<int> sentence_tokens(size_t i) const;
    std::vector<int> impression_tokens() const;  // marker sentence excluded
    bool empty() const { return tokens.empty(); }
};

bool is_impression_marker(const std::vector<int>& sentence_tokens, const Vocab& vocab);

struct ImageGrid {
    int cells = 0;  // token count (grid flattened row-major)
    int dim = 0;    // feature dim per cell
    std::vector<double> values;
};

// One patient study as the model sees it. The frontal view is always
// present; the other inputs follow the scenario.
struct StudyInput {
    std::string id;
    std::string split = "train";
    Scenario scenario = Scenario::sn;
    ImageGrid frontal;
    std::optional<ImageGrid> lateral;
    std::optional<std::string> prior_report;
    std::optional<std::string> indication;
    std::optional<std::string> history;

    void validate() const;  // scenario/presence consistency
};

// Condition status in the synthetic world.
enum class CondStatus { absent = 0, negated = 1, uncertain = 2, positive = 3 };
using StatusVector = std::array<CondStatus, 13>;

struct Study {
    StudyInput input;
    ReportDoc report;  // gold current report with tags, sections, labels
    StatusVector current{};
    std::optional<StatusVector> prior;
    CategoryFlags injected;  // which forbidden categories were injected
};

struct Corpus {
    int schema = 1;
    std::vector<Study> studies;

    void save_jsonl(const std::string& path) const;
    static Corpus load_jsonl(const std::string& path, const Vocab& vocab);
};

struct GenRecord {
    std::string id;
    Scenario scenario = Scenario::sn;
    std::vector<int> tokens;
    std::string text;
};

void save_generated(const std::string& path, const std::vector<GenRecord>& records);
std::vector<GenRecord> load_generated(const std::string& path);

uint64_t report_hash(const ReportDoc& doc);

}  // namespace rg4::data
