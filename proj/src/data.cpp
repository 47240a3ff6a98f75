#include "rg4/data.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rg4/rng.hpp"

namespace rg4::data {

using nlohmann::json;

bool has_lateral(Scenario s) { return s == Scenario::mn || s == Scenario::mw; }
bool has_prior(Scenario s) { return s == Scenario::sw || s == Scenario::mw; }

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::sn: return "sn";
        case Scenario::sw: return "sw";
        case Scenario::mn: return "mn";
        case Scenario::mw: return "mw";
    }
    return "?";
}

Scenario scenario_from_string(const std::string& s) {
    if (s == "sn") return Scenario::sn;
    if (s == "sw") return Scenario::sw;
    if (s == "mn") return Scenario::mn;
    if (s == "mw") return Scenario::mw;
    throw std::invalid_argument("unknown scenario '" + s + "'");
}

std::string to_string(SentTag t) {
    switch (t) {
        case SentTag::none: return "none";
        case SentTag::pc: return "pc";
        case SentTag::pp: return "pp";
        case SentTag::view: return "view";
        case SentTag::comm: return "comm";
    }
    return "?";
}

SentTag tag_from_string(const std::string& s) {
    if (s == "none") return SentTag::none;
    if (s == "pc") return SentTag::pc;
    if (s == "pp") return SentTag::pp;
    if (s == "view") return SentTag::view;
    if (s == "comm") return SentTag::comm;
    throw std::invalid_argument("unknown sentence tag '" + s + "'");
}

Vocab::Vocab(const std::vector<std::string>& words) {
    words_.push_back("<unk>");
    words_.push_back("<eos>");
    for (const auto& w : words) {
        if (index_.count(w) || w == "<unk>" || w == "<eos>") continue;
        index_[w] = static_cast<int>(words_.size());
        words_.push_back(w);
    }
    index_["<unk>"] = 0;
    index_["<eos>"] = 1;
}

int Vocab::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? unk() : it->second;
}

const std::string& Vocab::word(int id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("vocab: id " + std::to_string(id) + " out of range");
    return words_[static_cast<size_t>(id)];
}

std::vector<int> Vocab::tokenize(const std::string& text) const {
    std::vector<int> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(id(w));
    return out;
}

std::string Vocab::detokenize(const std::vector<int>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == eos()) break;
        if (i) out += ' ';
        out += word(ids[i]);
    }
    return out;
}

bool is_impression_marker(const std::vector<int>& sent, const Vocab& vocab) {
    return sent.size() == 2 && sent[0] == vocab.id("impression") && sent[1] == vocab.id(".");
}

ReportDoc ReportDoc::from_text(const Vocab& vocab, const std::string& text) {
    ReportDoc doc;
    doc.text = text;
    doc.tokens = vocab.tokenize(text);
    const int period = vocab.id(".");
    Section section = Section::findings;
    int begin = 0;
    auto flush = [&](int end) {
        if (end <= begin) return;
        Sentence s;
        s.begin = begin;
        s.end = end;
        std::vector<int> toks(doc.tokens.begin() + begin, doc.tokens.begin() + end);
        if (is_impression_marker(toks, vocab)) {
            section = Section::impression;
            s.section = Section::impression;
            s.marker = true;
        } else {
            s.section = section;
        }
        doc.sentences.push_back(s);
        begin = end;
    };
    for (int i = 0; i < static_cast<int>(doc.tokens.size()); ++i)
        if (doc.tokens[static_cast<size_t>(i)] == period) flush(i + 1);
    flush(static_cast<int>(doc.tokens.size()));
    return doc;
}

std::vector<int> ReportDoc::sentence_tokens(size_t i) const {
    const auto& s = sentences[i];
    return std::vector<int>(tokens.begin() + s.begin, tokens.begin() + s.end);
}

std::vector<int> ReportDoc::impression_tokens() const {
    std::vector<int> out;
    for (const auto& s : sentences) {
        if (s.section != Section::impression || s.marker) continue;
        out.insert(out.end(), tokens.begin() + s.begin, tokens.begin() + s.end);
    }
    return out;
}

void StudyInput::validate() const {
    if (frontal.values.empty()) throw std::invalid_argument("study " + id + ": frontal view missing");
    if (lateral.has_value() != has_lateral(scenario))
        throw std::invalid_argument("study " + id + ": lateral presence inconsistent with scenario " +
                                    to_string(scenario));
    if (prior_report.has_value() != has_prior(scenario))
        throw std::invalid_argument("study " + id + ": prior presence inconsistent with scenario " +
                                    to_string(scenario));
}

namespace {

json grid_to_json(const ImageGrid& g) {
    return json{{"cells", g.cells}, {"dim", g.dim}, {"v", g.values}};
}

ImageGrid grid_from_json(const json& j) {
    ImageGrid g;
    g.cells = j.at("cells").get<int>();
    g.dim = j.at("dim").get<int>();
    g.values = j.at("v").get<std::vector<double>>();
    return g;
}

json report_to_json(const ReportDoc& r) {
    json sents = json::array();
    for (const auto& s : r.sentences)
        sents.push_back(json::array({s.begin, s.end, to_string(s.tag),
                                     s.section == Section::impression ? "impression" : "findings"}));
    return json{{"text", r.text}, {"sentences", sents}, {"labels", r.labels}};
}

ReportDoc report_from_json(const json& j, const Vocab& vocab) {
    ReportDoc r = ReportDoc::from_text(vocab, j.at("text").get<std::string>());
    const auto& sents = j.at("sentences");
    if (sents.size() != r.sentences.size())
        throw std::runtime_error("corpus: sentence spans disagree with retokenized text");
    for (size_t i = 0; i < r.sentences.size(); ++i) {
        r.sentences[i].begin = sents[i][0].get<int>();
        r.sentences[i].end = sents[i][1].get<int>();
        r.sentences[i].tag = tag_from_string(sents[i][2].get<std::string>());
        r.sentences[i].section =
            sents[i][3].get<std::string>() == "impression" ? Section::impression : Section::findings;
    }
    auto labels = j.at("labels").get<std::vector<int>>();
    if (labels.size() != r.labels.size()) throw std::runtime_error("corpus: label vector size");
    std::copy(labels.begin(), labels.end(), r.labels.begin());
    return r;
}

std::array<int, 13> status_to_ints(const StatusVector& s) {
    std::array<int, 13> out{};
    for (size_t i = 0; i < s.size(); ++i) out[i] = static_cast<int>(s[i]);
    return out;
}

StatusVector status_from_ints(const std::vector<int>& v) {
    StatusVector s{};
    for (size_t i = 0; i < s.size() && i < v.size(); ++i) s[i] = static_cast<CondStatus>(v[i]);
    return s;
}

}  // namespace

void Corpus::save_jsonl(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("corpus: cannot open '" + path + "' for writing");
    for (const auto& st : studies) {
        json j;
        j["schema"] = schema;
        j["id"] = st.input.id;
        j["split"] = st.input.split;
        j["scenario"] = to_string(st.input.scenario);
        j["frontal"] = grid_to_json(st.input.frontal);
        j["lateral"] = st.input.lateral ? grid_to_json(*st.input.lateral) : json();
        j["prior"] = st.input.prior_report ? json(*st.input.prior_report) : json();
        j["indication"] = st.input.indication ? json(*st.input.indication) : json();
        j["history"] = st.input.history ? json(*st.input.history) : json();
        j["report"] = report_to_json(st.report);
        j["latent_current"] = status_to_ints(st.current);
        j["latent_prior"] = st.prior ? json(status_to_ints(*st.prior)) : json();
        j["injected"] = json{{"pc", st.injected.pc}, {"pp", st.injected.pp},
                             {"view", st.injected.view}, {"comm", st.injected.comm}};
        os << j.dump() << '\n';
    }
    if (!os) throw std::runtime_error("corpus: write failed for '" + path + "'");
}

Corpus Corpus::load_jsonl(const std::string& path, const Vocab& vocab) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("corpus: cannot open '" + path + "'");
    Corpus c;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.at("schema").get<int>() != 1)
            throw std::runtime_error("corpus: unsupported schema " + j.at("schema").dump());
        Study st;
        st.input.id = j.at("id").get<std::string>();
        st.input.split = j.at("split").get<std::string>();
        st.input.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        st.input.frontal = grid_from_json(j.at("frontal"));
        if (!j.at("lateral").is_null()) st.input.lateral = grid_from_json(j.at("lateral"));
        if (!j.at("prior").is_null()) st.input.prior_report = j.at("prior").get<std::string>();
        if (!j.at("indication").is_null()) st.input.indication = j.at("indication").get<std::string>();
        if (!j.at("history").is_null()) st.input.history = j.at("history").get<std::string>();
        st.report = report_from_json(j.at("report"), vocab);
        st.current = status_from_ints(j.at("latent_current").get<std::vector<int>>());
        if (!j.at("latent_prior").is_null())
            st.prior = status_from_ints(j.at("latent_prior").get<std::vector<int>>());
        st.injected.pc = j.at("injected").at("pc").get<bool>();
        st.injected.pp = j.at("injected").at("pp").get<bool>();
        st.injected.view = j.at("injected").at("view").get<bool>();
        st.injected.comm = j.at("injected").at("comm").get<bool>();
        st.input.validate();
        c.studies.push_back(std::move(st));
    }
    return c;
}

void save_generated(const std::string& path, const std::vector<GenRecord>& records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("generated: cannot open '" + path + "' for writing");
    for (const auto& r : records) {
        json j{{"id", r.id}, {"scenario", to_string(r.scenario)}, {"tokens", r.tokens}, {"text", r.text}};
        os << j.dump() << '\n';
    }
}

std::vector<GenRecord> load_generated(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("generated: cannot open '" + path + "'");
    std::vector<GenRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        GenRecord r;
        r.id = j.at("id").get<std::string>();
        r.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        r.tokens = j.at("tokens").get<std::vector<int>>();
        r.text = j.at("text").get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

uint64_t report_hash(const ReportDoc& doc) { return core::fnv1a64(doc.text); }

}  // namespace rg4::data
