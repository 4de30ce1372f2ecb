#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace aif {

enum class Polarity { kPositive, kNegative, kTwoWay };
enum class Provenance { kSeed, kExpanded };

Polarity parse_polarity(const std::string& s);  // throws SchemaError
std::string to_string(Polarity p);
std::string to_string(Provenance p);

struct IndicatorEntry {
  std::string name;
  Polarity polarity = Polarity::kPositive;
  Provenance provenance = Provenance::kSeed;
  double score = 1.0;  // cosine similarity for expanded entries
};

struct SecondaryIndicator {
  std::string name;
  std::vector<IndicatorEntry> entries;
};

struct PrimaryIndicator {
  std::string name;
  std::vector<SecondaryIndicator> secondaries;
};

struct IndicatorHierarchy {
  std::vector<PrimaryIndicator> primaries;

  // Entry names in hierarchy order.
  std::vector<std::string> entry_names() const;
  const IndicatorEntry* find_entry(const std::string& name) const;
  // Throws SchemaError on duplicate entry names or empty secondaries.
  void validate() const;
};

// CSV columns: primary, secondary, entry, polarity and optionally
// provenance, score (the expanded form). Rows sharing a primary or
// secondary name must be contiguous.
IndicatorHierarchy load_hierarchy_csv(const std::filesystem::path& path);

void save_hierarchy_csv(const std::filesystem::path& path,
                        const IndicatorHierarchy& hierarchy);

}  // namespace aif
