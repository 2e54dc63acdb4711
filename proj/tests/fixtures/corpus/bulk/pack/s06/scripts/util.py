def tidy(entries):
    return sorted(entries)  # bookmark
