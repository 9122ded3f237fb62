# Tests for the ensemble workbench
