#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrceval/core.hpp"
#include "mrceval/text.hpp"

namespace mrceval {

struct PlaceholderProfile {
    std::string profession;
    std::string context_type;
    std::string query_type;
};

inline PlaceholderProfile profile_for(DatasetTag tag) {
    switch (tag) {
        case DatasetTag::processbank:
            return {"biologist", "paragraph", "query"};
        case DatasetTag::biomrc:
            return {"biomedical researcher", "abstract of the paper",
                    "title containing the missing entity"};
        case DatasetTag::mashqa:
            return {"consumer healthcare expert", "healthcare article", "query"};
        case DatasetTag::clicr:
            return {"medical expert", "clinical case report",
                    "query containing the missing entity"};
    }
    throw std::logic_error("bad DatasetTag");
}

struct StrategyConfig {
    Strategy strategy = Strategy::basic;
    int ar_num_pairs = 3;
    int irag_num_sections = 1;
    int irag_lower_words = 50;
    int irag_upper_words = 200;

    static StrategyConfig defaults_for(Strategy s, DatasetTag tag) {
        StrategyConfig cfg;
        cfg.strategy = s;
        cfg.ar_num_pairs = 3;
        switch (tag) {
            case DatasetTag::processbank: cfg.irag_num_sections = 2; break;
            case DatasetTag::biomrc: cfg.irag_num_sections = 3; break;
            case DatasetTag::mashqa: cfg.irag_num_sections = 1; break;
            case DatasetTag::clicr: cfg.irag_num_sections = 3; break;
        }
        if (tag == DatasetTag::mashqa) {
            cfg.irag_lower_words = 0;
            cfg.irag_upper_words = 300;
        } else {
            cfg.irag_lower_words = 50;
            cfg.irag_upper_words = 200;
        }
        return cfg;
    }
};

struct PromptText {
    std::string text;
    size_t word_count = 0;
};

struct RenderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Loads the template assets (templates/<strategy>/<dataset>.txt). Templates
// are checked-in text; prompts are never assembled from code fragments.
class TemplateSet {
public:
    static TemplateSet load(const std::filesystem::path& dir) {
        static const char* strategies[] = {"basic", "cot", "ar", "implicit_rag",
                                           "implicit_rag_retrieve", "implicit_rag_final"};
        static const char* datasets[] = {"processbank", "biomrc", "mashqa", "clicr"};
        TemplateSet set;
        set.dir_ = dir;
        for (const char* s : strategies) {
            for (const char* d : datasets) {
                auto path = dir / s / (std::string(d) + ".txt");
                std::ifstream in(path);
                if (!in)
                    throw RenderError("missing template asset: " + path.string());
                std::ostringstream buf;
                buf << in.rdbuf();
                set.templates_[key(s, d)] = buf.str();
            }
        }
        return set;
    }

    const std::string& get(const std::string& strategy, DatasetTag tag) const {
        auto it = templates_.find(key(strategy, to_string(tag)));
        if (it == templates_.end())
            throw RenderError("no template for " + strategy + "/" + to_string(tag));
        return it->second;
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    static std::string key(const std::string& s, const std::string& d) { return s + "/" + d; }
    std::filesystem::path dir_;
    std::map<std::string, std::string> templates_;
};

namespace detail {

inline std::string substitute(const std::string& tpl,
                              const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.size());
    size_t i = 0;
    while (i < tpl.size()) {
        size_t open = tpl.find('{', i);
        if (open == std::string::npos) {
            out.append(tpl, i, std::string::npos);
            break;
        }
        out.append(tpl, i, open - i);
        size_t close = tpl.find('}', open);
        if (close == std::string::npos)
            throw RenderError("unterminated placeholder in template");
        std::string name = tpl.substr(open + 1, close - open - 1);
        auto it = vars.find(name);
        if (it == vars.end())
            throw RenderError("unresolved placeholder: {" + name + "}");
        out.append(it->second);
        i = close + 1;
    }
    return out;
}

inline std::string options_string(const MrcInstance& inst) {
    std::string out;
    for (const auto& c : inst.candidates) {
        if (!out.empty()) out += ", ";
        out += c.id + ") ";
        for (size_t k = 0; k < c.surface_forms.size(); ++k) {
            if (k) out += " / ";
            out += c.surface_forms[k];
        }
    }
    return out;
}

inline std::map<std::string, std::string> base_vars(const MrcInstance& inst,
                                                    const PlaceholderProfile& profile) {
    auto violations = validate_instance(inst);
    if (!violations.empty())
        throw RenderError("invalid instance " + inst.id + ": " + violations.front());
    std::map<std::string, std::string> vars{
        {"profession", profile.profession},
        {"context_type", profile.context_type},
        {"query_type", profile.query_type},
        {"query_text", inst.query_text},
        {"context_text", inst.context.text},
    };
    if (!inst.candidates.empty()) vars["options"] = options_string(inst);
    return vars;
}

inline PromptText finish(std::string text) {
    PromptText p;
    p.word_count = text::word_count(text);
    p.text = std::move(text);
    return p;
}

}  // namespace detail

inline PromptText render_basic(const MrcInstance& inst, const PlaceholderProfile& profile,
                               const TemplateSet& templates) {
    return detail::finish(detail::substitute(templates.get("basic", inst.dataset),
                                             detail::base_vars(inst, profile)));
}

inline PromptText render_cot(const MrcInstance& inst, const PlaceholderProfile& profile,
                             const TemplateSet& templates) {
    return detail::finish(detail::substitute(templates.get("cot", inst.dataset),
                                             detail::base_vars(inst, profile)));
}

inline PromptText render_ar(const MrcInstance& inst, const PlaceholderProfile& profile,
                            const StrategyConfig& cfg, const TemplateSet& templates) {
    if (cfg.ar_num_pairs < 1)
        throw RenderError("ar_num_pairs must be >= 1");
    auto vars = detail::base_vars(inst, profile);
    vars["num_qa_pairs"] = std::to_string(cfg.ar_num_pairs);
    return detail::finish(detail::substitute(templates.get("ar", inst.dataset), vars));
}

namespace detail {
inline void add_irag_vars(std::map<std::string, std::string>& vars, const StrategyConfig& cfg) {
    if (cfg.irag_num_sections < 1 || cfg.irag_lower_words < 0 ||
        cfg.irag_upper_words <= cfg.irag_lower_words)
        throw RenderError("invalid implicit RAG limits");
    vars["number_of_sections"] = std::to_string(cfg.irag_num_sections);
    vars["lower_limit_length"] = std::to_string(cfg.irag_lower_words);
    vars["upper_limit_length"] = std::to_string(cfg.irag_upper_words);
}
}  // namespace detail

inline PromptText render_irag(const MrcInstance& inst, const PlaceholderProfile& profile,
                              const StrategyConfig& cfg, const TemplateSet& templates) {
    auto vars = detail::base_vars(inst, profile);
    detail::add_irag_vars(vars, cfg);
    return detail::finish(detail::substitute(templates.get("implicit_rag", inst.dataset), vars));
}

// Retrieval-only prompt for chunked mode; the chunk stands in for the context.
inline PromptText render_irag_retrieve(const std::string& chunk_text, const MrcInstance& inst,
                                       const PlaceholderProfile& profile,
                                       const StrategyConfig& cfg, const TemplateSet& templates) {
    if (text::trim(chunk_text).empty())
        throw RenderError("empty chunk");
    auto vars = detail::base_vars(inst, profile);
    vars["context_text"] = chunk_text;
    detail::add_irag_vars(vars, cfg);
    return detail::finish(
        detail::substitute(templates.get("implicit_rag_retrieve", inst.dataset), vars));
}

// Answer-only prompt presenting pooled sections in place of the full context.
inline PromptText render_irag_final(const std::vector<RetrievedSection>& sections,
                                    const MrcInstance& inst, const PlaceholderProfile& profile,
                                    const TemplateSet& templates) {
    if (sections.empty())
        throw RenderError("empty section list");
    auto vars = detail::base_vars(inst, profile);
    std::string joined;
    for (size_t i = 0; i < sections.size(); ++i) {
        if (i) joined += '\n';
        joined += "Section " + std::to_string(i + 1) + ": " + sections[i].text;
    }
    vars["sections_text"] = joined;
    return detail::finish(
        detail::substitute(templates.get("implicit_rag_final", inst.dataset), vars));
}

}  // namespace mrceval
