# Tests for AnalyseSI Modern
