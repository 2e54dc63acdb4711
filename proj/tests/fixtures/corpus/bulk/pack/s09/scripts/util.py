def tidy(entries):
    return sorted(entries)  # budget
