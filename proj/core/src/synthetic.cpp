#include "aler/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

namespace aler {

void PerturbationSpec::validate() const {
  auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
  };
  check(typo_rate, "typo_rate");
  check(token_drop, "token_drop");
  check(abbreviation, "abbreviation");
}

// ---------------------------------------------------------------------------

SurrogateEncoder::SurrogateEncoder(std::size_t dim, std::uint64_t salt) : dim_(dim), salt_(salt) {
  if (dim == 0) throw ValidationError("encoder dim must be positive");
}

std::vector<float> SurrogateEncoder::encode(std::string_view text) const {
  std::vector<double> acc(dim_, 0.0);
  auto add = [&](std::string_view gram, double weight) {
    const std::uint64_t h = mix_seed(fnv1a(gram), salt_);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    acc[static_cast<std::size_t>(h % dim_)] += sign * weight;
  };

  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && std::isspace(static_cast<unsigned char>(lowered[i]))) ++i;
    std::size_t j = i;
    while (j < lowered.size() && !std::isspace(static_cast<unsigned char>(lowered[j]))) ++j;
    if (j > i) {
      const std::string word = " " + lowered.substr(i, j - i) + " ";
      add(word, 1.0);
      for (std::size_t g = 0; g + 3 <= word.size(); ++g) add(std::string_view(word).substr(g, 3), 1.0);
    }
    i = j;
  }

  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(dim_, 0.0f);
  if (norm == 0.0) {
    out[0] = 1.0f;
    return out;
  }
  for (std::size_t d = 0; d < dim_; ++d) out[d] = static_cast<float>(acc[d] / norm);
  return out;
}

EmbeddingMatrix SurrogateEncoder::encode(const RecordCollection& records) const {
  EmbeddingMatrix out(dim_);
  for (const auto& record : records.records()) {
    std::string text;
    for (const auto& v : record.values) {
      if (!text.empty()) text += ' ';
      text += v;
    }
    out.add(record.id, encode(text));
  }
  out.normalize();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array kBrands = {
    "Acmetron", "Belkora",  "Corvane", "Dynalux", "Everpeak", "Fontaro",  "Gravix",  "Helion",
    "Ionexa",   "Jovatek",  "Kelvra",  "Lumora",  "Maxtone",  "Norvik",   "Orbis",   "Pentrax",
    "Quadrel",  "Rivona",   "Sonexa",  "Trivant", "Ulmera",   "Vextor",   "Wavelyn", "Xentra",
    "Yarrow",   "Zephyron", "Altima",  "Brixel",  "Cindra",   "Delvano",  "Ekko",    "Fyrel"};

constexpr std::array kSeries = {"Pro",  "Max",  "Lite",  "Plus", "Ultra", "Mini", "Air",
                                "Neo",  "Prime", "Edge", "Nova", "Flex",  "Core", "Studio"};

struct Category {
  const char* name;
  std::array<const char*, 4> nouns;
};

constexpr std::array kCategories = {
    Category{"audio", {"wireless headphones", "bluetooth speaker", "soundbar", "earbuds"}},
    Category{"computing", {"laptop computer", "mechanical keyboard", "optical mouse", "monitor"}},
    Category{"camera", {"digital camera", "action camera", "zoom lens", "camera tripod"}},
    Category{"kitchen", {"coffee maker", "stand mixer", "electric kettle", "toaster oven"}},
    Category{"storage", {"external drive", "memory card", "usb flash drive", "network storage"}},
    Category{"phone", {"smartphone", "phone case", "wireless charger", "screen protector"}},
    Category{"television", {"led television", "streaming stick", "wall mount", "remote control"}},
    Category{"gaming", {"game controller", "gaming headset", "racing wheel", "gaming chair"}},
    Category{"home", {"robot vacuum", "air purifier", "smart thermostat", "desk lamp"}},
    Category{"fitness", {"fitness tracker", "smart watch", "heart monitor", "exercise bike"}}};

constexpr std::array kExtras = {"black",  "white", "silver", "blue",   "red",    "graphite",
                                "16gb",   "32gb",  "64gb",   "128gb",  "256gb",  "1tb",
                                "2 pack", "bundle", "refurbished", "international version"};

constexpr std::array kFirst = {"Martha", "James",  "Olivia",  "Robert", "Sophia", "Daniel",
                               "Amelia", "Thomas", "Isabel",  "Victor", "Hannah", "Marcus",
                               "Clara",  "Felix",  "Eleanor", "Samuel", "Nadia",  "Oscar",
                               "Lucia",  "Henry",  "Priya",   "Mateo",  "Greta",  "Anton"};

constexpr std::array kLast = {"Anderson", "Brennan",  "Castillo", "Dubois",  "Eriksen",
                              "Fischer",  "Gallagher", "Hartmann", "Ivanova", "Jensen",
                              "Kowalski", "Lindqvist", "Moreau",   "Nakamura", "Okafor",
                              "Petrov",   "Quintero",  "Rasmussen", "Schneider", "Takahashi",
                              "Urbina",   "Vasquez",   "Whitfield", "Yamamoto", "Zielinski",
                              "Abbott",   "Barrett",   "Delgado",  "Foster",   "Grant"};

constexpr std::array kCities = {"Springfield", "Riverton", "Lakewood", "Fairview", "Georgetown",
                                "Brookfield",  "Ashland",  "Kingston", "Milford",  "Clayton",
                                "Oakridge",    "Westport", "Salem",    "Madison",  "Dover"};

constexpr std::array kJobs = {"teacher", "engineer",   "nurse",     "accountant", "architect",
                              "chemist", "electrician", "librarian", "pharmacist", "surveyor"};

struct Abbrev {
  const char* word;
  const char* shortened;
};

constexpr std::array kAbbrev = {
    Abbrev{"wireless", "wrls"},   Abbrev{"bluetooth", "bt"},   Abbrev{"computer", "comp"},
    Abbrev{"mechanical", "mech"}, Abbrev{"digital", "dig"},    Abbrev{"external", "ext"},
    Abbrev{"television", "tv"},  Abbrev{"international", "intl"},
    Abbrev{"refurbished", "refurb"}, Abbrev{"controller", "ctrl"}, Abbrev{"electric", "elec"},
    Abbrev{"professional", "pro"}, Abbrev{"black", "blk"},    Abbrev{"white", "wht"},
    Abbrev{"silver", "slv"},      Abbrev{"smartphone", "phone"}};

using Rng = std::mt19937_64;

template <typename Array>
const char* pick(const Array& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

bool chance(double p, Rng& rng) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::string model_code(Rng& rng) {
  std::uniform_int_distribution<int> letter(0, 25);
  std::uniform_int_distribution<int> digits(1000, 9999);
  std::string code;
  code += static_cast<char>('A' + letter(rng));
  code += static_cast<char>('A' + letter(rng));
  code += '-';
  code += std::to_string(digits(rng));
  return code;
}

std::string person_code(int year, Rng& rng) {
  char code[32];
  std::snprintf(code, sizeof code, "%d-%04d", year, std::uniform_int_distribution<int>(0, 9999)(rng));
  return code;
}

struct Entity {
  std::vector<std::string> values;  // title, maker, category, code
  bool person = false;
  // Generator state reused when building siblings.
  std::string brand, series, noun, extra, first, last;
  int year = 0;
};

std::string product_title(const Entity& e) {
  return e.brand + " " + e.series + " " + e.noun + " " + e.values[3] + " " + e.extra;
}

Entity make_product(Rng& rng) {
  Entity e;
  const auto& cat = kCategories[std::uniform_int_distribution<std::size_t>(0, kCategories.size() - 1)(rng)];
  e.brand = pick(kBrands, rng);
  e.series = pick(kSeries, rng);
  e.noun = cat.nouns[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
  e.extra = pick(kExtras, rng);
  e.values = {"", e.brand, cat.name, model_code(rng)};
  e.values[0] = product_title(e);
  return e;
}

Entity make_person(Rng& rng) {
  Entity e;
  e.person = true;
  e.first = pick(kFirst, rng);
  e.last = pick(kLast, rng);
  e.year = std::uniform_int_distribution<int>(1940, 2004)(rng);
  const std::string city = pick(kCities, rng);
  const std::string job = pick(kJobs, rng);
  e.values = {e.first + " " + e.last, city, job, person_code(e.year, rng)};
  return e;
}

/// Another entity identical except for its code: a different model from the
/// same product family, or a namesake in the same city.
Entity make_sibling(const Entity& base, Rng& rng) {
  Entity e = base;
  if (base.person) {
    while (e.values[3] == base.values[3]) {
      e.values[3] = person_code(std::uniform_int_distribution<int>(1940, 2004)(rng), rng);
    }
  } else {
    while (e.values[3] == base.values[3]) e.values[3] = model_code(rng);
    e.values[0] = product_title(e);
  }
  return e;
}

std::string abbreviate(const std::string& token) {
  std::string lower = token;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const auto& a : kAbbrev) {
    if (lower == a.word) return a.shortened;
  }
  if (token.size() > 5 && std::isalpha(static_cast<unsigned char>(token[0]))) {
    return token.substr(0, 4) + ".";
  }
  return token;
}

std::string apply_typos(const std::string& s, double rate, Rng& rng) {
  if (rate <= 0.0) return s;
  std::string out;
  std::uniform_int_distribution<int> op(0, 3);
  std::uniform_int_distribution<int> letter(0, 25);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ' ' || !chance(rate, rng)) {
      out += s[i];
      continue;
    }
    switch (op(rng)) {
      case 0:  // substitute
        out += static_cast<char>('a' + letter(rng));
        break;
      case 1:  // delete
        break;
      case 2:  // insert
        out += s[i];
        out += static_cast<char>('a' + letter(rng));
        break;
      default:  // transpose with the next character
        if (i + 1 < s.size() && s[i + 1] != ' ') {
          out += s[i + 1];
          out += s[i];
          ++i;
        } else {
          out += s[i];
        }
    }
  }
  return out.empty() ? s : out;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string perturb_text(const std::string& text, const PerturbationSpec& spec, bool allow_drop,
                         const std::string& protected_token, Rng& rng) {
  auto words = split_words(text);
  std::vector<std::string> kept;
  for (const auto& w : words) {
    if (allow_drop && w != protected_token && chance(spec.token_drop, rng)) continue;
    kept.push_back(w == protected_token || !chance(spec.abbreviation, rng) ? w : abbreviate(w));
  }
  if (kept.empty()) kept.push_back(words.front());
  std::string joined;
  for (const auto& w : kept) {
    if (!joined.empty()) joined += ' ';
    joined += w;
  }
  return apply_typos(joined, spec.typo_rate, rng);
}

std::vector<std::string> perturb(const Entity& e, const PerturbationSpec& spec, Rng& rng) {
  std::vector<std::string> v = e.values;
  v[0] = perturb_text(v[0], spec, true, e.person ? std::string() : e.values[3], rng);
  v[1] = perturb_text(v[1], spec, false, {}, rng);
  std::string code = e.values[3];
  if (chance(spec.abbreviation, rng)) code.erase(std::remove(code.begin(), code.end(), '-'), code.end());
  v[3] = apply_typos(code, spec.typo_rate / 2.0, rng);
  return v;
}

std::string numbered(char prefix, std::size_t i, std::size_t width) {
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

}  // namespace

SyntheticCorpus generate(std::size_t n_records, const PerturbationSpec& spec,
                         const SyntheticOptions& options) {
  spec.validate();
  if (n_records < 10) throw ValidationError("generate: n_records must be at least 10");
  if (!(options.distractor_rate >= 0.0) || !(options.person_fraction >= 0.0 && options.person_fraction <= 1.0) ||
      !(options.match_rate > 0.0 && options.match_rate <= 1.0)) {
    throw ValidationError("generate: invalid synthetic options");
  }
  Rng rng(mix_seed(spec.seed, 0x5c));
  const std::vector<std::string> schema = {"title", "maker", "category", "code"};
  SyntheticCorpus corpus{RecordCollection(schema), RecordCollection(schema), MatchSet{},
                         EmbeddingMatrix(options.dim), EmbeddingMatrix(options.dim)};

  std::vector<Entity> base;
  base.reserve(n_records);
  for (std::size_t i = 0; i < n_records; ++i) {
    base.push_back(chance(options.person_fraction, rng) ? make_person(rng) : make_product(rng));
  }
  const std::size_t width = std::max<std::size_t>(5, std::to_string(n_records * 3).size());
  for (std::size_t i = 0; i < n_records; ++i) {
    corpus.records_r.add({numbered('r', i + 1, width), base[i].values});
  }

  // S: one perturbed copy per base entity, then distractors.
  struct Pending {
    std::vector<std::string> values;
    std::size_t source;  // base index for copies, n_records for distractors
  };
  std::vector<Pending> s_side;
  for (std::size_t i = 0; i < n_records; ++i) {
    if (chance(options.match_rate, rng)) s_side.push_back({perturb(base[i], spec, rng), i});
  }
  const auto n_distractors =
      static_cast<std::size_t>(std::llround(options.distractor_rate * static_cast<double>(n_records)));
  std::uniform_int_distribution<std::size_t> any(0, n_records - 1);
  for (std::size_t d = 0; d < n_distractors; ++d) {
    const Entity sibling = make_sibling(base[any(rng)], rng);
    s_side.push_back({perturb(sibling, spec, rng), n_records});
  }
  std::shuffle(s_side.begin(), s_side.end(), rng);
  for (std::size_t j = 0; j < s_side.size(); ++j) {
    const std::string s_id = numbered('s', j + 1, width);
    corpus.records_s.add({s_id, s_side[j].values});
    if (s_side[j].source < n_records) {
      corpus.truth.add({corpus.records_r.records()[s_side[j].source].id, s_id});
    }
  }

  const SurrogateEncoder encoder(options.dim);
  corpus.embeddings_r = encoder.encode(corpus.records_r);
  corpus.embeddings_s = encoder.encode(corpus.records_s);
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_records(corpus.records_r, dir / "records_r.csv");
  save_records(corpus.records_s, dir / "records_s.csv");
  save_match_set(corpus.truth, dir / "truth.csv");
  save_embeddings(corpus.embeddings_r, dir / "emb_r.txt", EmbeddingFormat::text);
  save_embeddings(corpus.embeddings_s, dir / "emb_s.txt", EmbeddingFormat::text);
}

}  // namespace aler
